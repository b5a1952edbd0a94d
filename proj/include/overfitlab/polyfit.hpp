#pragma once

// Least-squares polynomial regression on a fixed support.
//
// Fitting runs in a Chebyshev basis on the support mapped to [-1, 1]; that
// keeps the design matrix well conditioned up to degree 60 where a raw power
// basis would be numerically useless. Power-basis coefficients are recovered
// only as a human-readable view of the same function: both coefficient sets
// describe one polynomial, and evaluation prefers the stable basis.

#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "overfitlab/errors.hpp"
#include "overfitlab/numio.hpp"
#include "overfitlab/sources.hpp"

namespace overfitlab {

namespace detail {

// Chebyshev features T_0..T_k at u in [-1, 1] by forward recurrence.
inline void chebyshev_row(double u, int degree, double* row) {
  row[0] = 1.0;
  if (degree >= 1) row[1] = u;
  for (int j = 2; j <= degree; ++j) row[j] = 2.0 * u * row[j - 1] - row[j - 2];
}

inline double to_unit_interval(double x, const Interval& support) {
  return (2.0 * x - (support.a + support.b)) / support.width();
}

}  // namespace detail

inline Eigen::MatrixXd chebyshev_design(const std::vector<double>& xs, int degree,
                                        const Interval& support) {
  Eigen::MatrixXd design(static_cast<Eigen::Index>(xs.size()), degree + 1);
  std::vector<double> row(static_cast<std::size_t>(degree) + 1);
  for (std::size_t i = 0; i < xs.size(); ++i) {
    detail::chebyshev_row(detail::to_unit_interval(xs[i], support), degree, row.data());
    for (int j = 0; j <= degree; ++j) design(static_cast<Eigen::Index>(i), j) = row[j];
  }
  return design;
}

struct PolyModel {
  int degree = 0;
  std::vector<double> coefficients;        // power basis in x, display view
  std::vector<double> basis_coefficients;  // Chebyshev basis on the unit interval
  Interval support;
  double train_mse = 0.0;
  std::size_t train_n = 0;
  double condition_estimate = 1.0;
  std::vector<double> train_x;             // design points, kept for information matrices
  std::uint64_t sample_digest = 0;

  double operator()(double x) const {
    if (!basis_coefficients.empty()) {
      const double u = detail::to_unit_interval(x, support);
      double tm1 = 1.0, t = u, acc = basis_coefficients[0];
      if (basis_coefficients.size() > 1) acc += basis_coefficients[1] * u;
      for (std::size_t j = 2; j < basis_coefficients.size(); ++j) {
        const double tn = 2.0 * u * t - tm1;
        acc += basis_coefficients[j] * tn;
        tm1 = t;
        t = tn;
      }
      return acc;
    }
    return poly_eval(coefficients, x);
  }
};

namespace detail {

// Rewrites sum c_j T_j(u), u = s*x + t, as power-basis coefficients in x.
// Exact in exact arithmetic; done in long double because the expansion mixes
// terms of wildly different size at high degree. Display only.
inline std::vector<double> chebyshev_to_power(const std::vector<double>& cheb,
                                              const Interval& support) {
  const std::size_t m = cheb.size();
  // T_j as power coefficients in u.
  std::vector<std::vector<long double>> t(m);
  t[0] = {1.0L};
  if (m > 1) t[1] = {0.0L, 1.0L};
  for (std::size_t j = 2; j < m; ++j) {
    t[j].assign(j + 1, 0.0L);
    for (std::size_t i = 0; i < t[j - 1].size(); ++i) t[j][i + 1] += 2.0L * t[j - 1][i];
    for (std::size_t i = 0; i < t[j - 2].size(); ++i) t[j][i] -= t[j - 2][i];
  }
  std::vector<long double> in_u(m, 0.0L);
  for (std::size_t j = 0; j < m; ++j)
    for (std::size_t i = 0; i < t[j].size(); ++i) in_u[i] += static_cast<long double>(cheb[j]) * t[j][i];

  // Substitute u = s*x + t0 via binomial expansion.
  const long double s = 2.0L / static_cast<long double>(support.width());
  const long double t0 = -(static_cast<long double>(support.a) + support.b) /
                         static_cast<long double>(support.width());
  std::vector<long double> in_x(m, 0.0L);
  std::vector<long double> binom(m, 0.0L);
  for (std::size_t j = 0; j < m; ++j) {
    // (s*x + t0)^j expanded into binom[0..j].
    binom.assign(m, 0.0L);
    binom[0] = 1.0L;
    for (std::size_t step = 0; step < j; ++step) {
      for (std::size_t i = step + 1; i-- > 0;) {
        const long double v = binom[i];
        binom[i] = v * t0;
        binom[i + 1] += v * s;
      }
    }
    for (std::size_t i = 0; i <= j; ++i) in_x[i] += in_u[j] * binom[i];
  }
  std::vector<double> out(m);
  for (std::size_t i = 0; i < m; ++i) out[i] = static_cast<double>(in_x[i]);
  return out;
}

}  // namespace detail

// Least squares by column-pivoted QR. Requires n >= degree+1 data points.
// A vanishing pivot means the design columns are exactly dependent on this
// data (too few distinct x values) and the fit refuses; mere ill conditioning
// is reported through condition_estimate and the solve proceeds with every
// column, because near-singular high-degree designs are the regime whose
// off-sample behavior this laboratory exists to measure.
inline PolyModel fit(const Sample& sample, int degree) {
  sample.validate();
  if (degree < 0) throw config_error("fit: degree must be >= 0");
  const std::size_t n = sample.size();
  if (n < static_cast<std::size_t>(degree) + 1) throw underdetermined_fit_error(degree, n);

  Eigen::MatrixXd design = chebyshev_design(sample.x, degree, sample.support);
  Eigen::Map<const Eigen::VectorXd> y(sample.y.data(), static_cast<Eigen::Index>(n));

  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(design);
  qr.setThreshold(std::numeric_limits<double>::min());
  const int rank = static_cast<int>(qr.rank());
  if (rank < degree + 1) throw rank_deficient_error(degree, rank);
  const Eigen::VectorXd rdiag = qr.matrixR().diagonal().cwiseAbs();
  const double rmax = rdiag.maxCoeff();
  const double rmin = rdiag.minCoeff();

  Eigen::VectorXd coef = qr.solve(y);
  const Eigen::VectorXd residual = y - design * coef;

  PolyModel model;
  model.degree = degree;
  model.basis_coefficients.assign(coef.data(), coef.data() + coef.size());
  model.coefficients = detail::chebyshev_to_power(model.basis_coefficients, sample.support);
  model.support = sample.support;
  model.train_mse = residual.squaredNorm() / static_cast<double>(n);
  model.train_n = n;
  model.condition_estimate = rmax / rmin;
  model.train_x = sample.x;
  model.sample_digest = sample.digest();
  return model;
}

inline double mse(const PolyModel& model, const Sample& sample) {
  sample.validate();
  double acc = 0.0;
  for (std::size_t i = 0; i < sample.size(); ++i) {
    const double r = sample.y[i] - model(sample.x[i]);
    acc += r * r;
  }
  return acc / static_cast<double>(sample.size());
}

// Gaussian code length of the sample's y values under the model, in bits:
// sum over points of log2(1/p) for the N(f(x), variance) density.
inline double nll_bits(const PolyModel& model, const Sample& sample, double variance) {
  if (!(variance > 0.0)) throw config_error("nll_bits: variance must be > 0");
  sample.validate();
  const double n = static_cast<double>(sample.size());
  double ss = 0.0;
  for (std::size_t i = 0; i < sample.size(); ++i) {
    const double r = sample.y[i] - model(sample.x[i]);
    ss += r * r;
  }
  const double ln2 = std::numbers::ln2;
  return 0.5 * n * std::log2(2.0 * std::numbers::pi * variance) + ss / (2.0 * variance * ln2);
}

// Per-observation Fisher information of the coefficient vector at the
// model's design points: (1/(v*n)) * Phi^T Phi in the stable basis.
inline Eigen::MatrixXd fisher_information(const PolyModel& model, double variance) {
  if (!(variance > 0.0)) throw config_error("fisher_information: variance must be > 0");
  if (model.train_x.empty()) throw config_error("fisher_information: model has no design points");
  Eigen::MatrixXd design = chebyshev_design(model.train_x, model.degree, model.support);
  return (design.transpose() * design) /
         (variance * static_cast<double>(model.train_x.size()));
}

// Column i is the gradient of the log-density of point i with respect to the
// coefficients (natural log): phi(x_i) * (y_i - f(x_i)) / v.
inline Eigen::MatrixXd score_vector(const PolyModel& model, const Sample& sample,
                                    double variance) {
  if (!(variance > 0.0)) throw config_error("score_vector: variance must be > 0");
  sample.validate();
  const int p = model.degree + 1;
  Eigen::MatrixXd scores(p, static_cast<Eigen::Index>(sample.size()));
  std::vector<double> row(static_cast<std::size_t>(p));
  for (std::size_t i = 0; i < sample.size(); ++i) {
    detail::chebyshev_row(detail::to_unit_interval(sample.x[i], model.support), model.degree,
                          row.data());
    const double r = (sample.y[i] - model(sample.x[i])) / variance;
    for (int j = 0; j < p; ++j) scores(j, static_cast<Eigen::Index>(i)) = row[j] * r;
  }
  return scores;
}

inline nlohmann::ordered_json model_to_json(const PolyModel& model) {
  nlohmann::ordered_json j;
  j["degree"] = model.degree;
  j["coefficients"] = model.coefficients;
  j["train_mse"] = model.train_mse;
  j["train_n"] = model.train_n;
  j["support"] = {model.support.a, model.support.b};
  return j;
}

inline PolyModel model_from_json(const nlohmann::json& j) {
  PolyModel model;
  model.degree = j.at("degree").get<int>();
  model.coefficients = j.at("coefficients").get<std::vector<double>>();
  model.train_mse = j.at("train_mse").get<double>();
  model.train_n = j.at("train_n").get<std::size_t>();
  auto s = j.at("support").get<std::vector<double>>();
  if (s.size() != 2) throw config_error("model json: support must be [a, b]");
  model.support = {s[0], s[1]};
  if (static_cast<int>(model.coefficients.size()) != model.degree + 1)
    throw config_error("model json: coefficient count does not match degree");
  return model;
}

}  // namespace overfitlab

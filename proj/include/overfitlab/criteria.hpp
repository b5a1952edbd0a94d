#pragma once

// Model-selection criteria over a sweep of polynomial degrees fitted to one
// training sample: AIC, two-part MDL, mixture MDL (closed-form marginal
// likelihood with an optional Monte-Carlo cross-check), k-fold
// cross-validation, and a ground-truth KL ranking for diagnostics.
//
// Every criterion returns the same shape: a score per degree plus the argmin,
// with ties and near-ties (relative 1e-12) resolved toward the smaller
// degree. Scores are comparable within a criterion, not across criteria:
// AIC is in natural-log units, the MDL scores are code lengths in bits, and
// cross-validation is a raw MSE.

#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <numeric>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "overfitlab/errors.hpp"
#include "overfitlab/infotheory.hpp"
#include "overfitlab/numio.hpp"
#include "overfitlab/polyfit.hpp"
#include "overfitlab/rng.hpp"
#include "overfitlab/sources.hpp"

namespace overfitlab {

enum class Criterion { aic, mdl_two_part, mdl_mixture, cross_validation, oracle_kl };

inline constexpr std::array<Criterion, 5> kAllCriteria = {
    Criterion::aic, Criterion::mdl_two_part, Criterion::mdl_mixture,
    Criterion::cross_validation, Criterion::oracle_kl};

inline std::string to_string(Criterion c) {
  switch (c) {
    case Criterion::aic: return "aic";
    case Criterion::mdl_two_part: return "mdl_two_part";
    case Criterion::mdl_mixture: return "mdl_mixture";
    case Criterion::cross_validation: return "cross_validation";
    case Criterion::oracle_kl: return "oracle_kl";
  }
  throw config_error("unknown criterion enum value");
}

inline Criterion criterion_from_string(std::string_view name) {
  for (Criterion c : kAllCriteria)
    if (to_string(c) == name) return c;
  throw config_error("unknown criterion '" + std::string(name) + "'");
}

struct VariancePolicy {
  enum class Kind { per_model_mse, fixed };
  Kind kind = Kind::per_model_mse;
  double value = 0.0;

  static VariancePolicy per_model() { return {Kind::per_model_mse, 0.0}; }
  static VariancePolicy fixed(double variance) {
    if (!(variance > 0.0)) throw config_error("variance policy: fixed variance must be > 0");
    return {Kind::fixed, variance};
  }
};

struct SweepInput {
  std::vector<PolyModel> models;  // degrees k_min..k_max, contiguous
  std::size_t train_n = 0;
  VariancePolicy shared_variance_policy;
  Sample train;

  int k_min() const { return models.front().degree; }
  int k_max() const { return models.back().degree; }

  void validate() const {
    if (models.empty()) throw config_error("sweep: no models");
    const std::uint64_t digest = models.front().sample_digest;
    for (std::size_t i = 0; i < models.size(); ++i) {
      if (models[i].degree != models.front().degree + static_cast<int>(i))
        throw config_error("sweep: degree range must be contiguous");
      if (models[i].train_n != train_n || models[i].sample_digest != digest)
        throw config_error("sweep: models fitted on different samples");
    }
    if (train.digest() != digest) throw config_error("sweep: sample does not match models");
  }
};

inline SweepInput make_sweep(const Sample& train, int k_min, int k_max,
                             VariancePolicy policy) {
  if (k_min < 0 || k_max < k_min) throw config_error("sweep: invalid degree range");
  SweepInput sweep;
  sweep.train = train;
  sweep.train_n = train.size();
  sweep.shared_variance_policy = policy;
  sweep.models.reserve(static_cast<std::size_t>(k_max - k_min) + 1);
  for (int k = k_min; k <= k_max; ++k) sweep.models.push_back(fit(train, k));
  sweep.validate();
  return sweep;
}

struct CriterionScore {
  Criterion criterion = Criterion::aic;
  std::vector<std::pair<int, double>> per_degree;
  int selected_k = 0;
  bool tie_policy_applied = false;
  std::vector<std::string> warnings;
};

namespace detail {

// Smallest degree whose score is within relative 1e-12 of the minimum.
// The slack exists for scores that are equal in exact arithmetic but differ
// in the last float bits (noiseless fits); it is far below any real score
// difference the criteria produce.
inline void select_minimum(CriterionScore& score) {
  double best = score.per_degree.front().second;
  for (const auto& [k, s] : score.per_degree) best = std::min(best, s);
  const double slack = 1e-12 * std::max(1.0, std::abs(best));
  int qualifying = 0;
  int chosen = score.per_degree.front().first;
  for (const auto& [k, s] : score.per_degree) {
    if (s - best <= slack) {
      if (qualifying == 0) chosen = k;
      ++qualifying;
    }
  }
  score.selected_k = chosen;
  score.tie_policy_applied = qualifying > 1;
}

inline double model_variance(const PolyModel& model, const VariancePolicy& policy) {
  if (policy.kind == VariancePolicy::Kind::fixed) return policy.value;
  if (!(model.train_mse > 0.0)) throw degenerate_fit_error(model.degree);
  return model.train_mse;
}

}  // namespace detail

// n * ln(residual variance) + 2k, natural log.
inline CriterionScore aic(const SweepInput& sweep) {
  sweep.validate();
  CriterionScore score;
  score.criterion = Criterion::aic;
  const double n = static_cast<double>(sweep.train_n);
  for (const auto& model : sweep.models) {
    if (!(model.train_mse > 0.0)) throw degenerate_fit_error(model.degree);
    score.per_degree.emplace_back(model.degree,
                                  n * std::log(model.train_mse) + 2.0 * model.degree);
  }
  detail::select_minimum(score);
  return score;
}

// Data code length in bits plus k*log2(sqrt(n)) parameter bits. Under the
// per-model variance policy the data term reduces to n/2*log2(2*pi*e*mse_k).
inline CriterionScore mdl_two_part(const SweepInput& sweep) {
  sweep.validate();
  CriterionScore score;
  score.criterion = Criterion::mdl_two_part;
  const double n = static_cast<double>(sweep.train_n);
  const double penalty_per_param = std::log2(std::sqrt(n));
  for (const auto& model : sweep.models) {
    const double v = detail::model_variance(model, sweep.shared_variance_policy);
    score.per_degree.emplace_back(
        model.degree, nll_bits(model, sweep.train, v) + model.degree * penalty_per_param);
  }
  if (sweep.train_n == 1)
    score.warnings.push_back(
        "small-sample: parameter penalty log2(sqrt(1)) = 0, selection is pure max-likelihood");
  detail::select_minimum(score);
  return score;
}

// Marginal likelihood of the data under a Gaussian prior N(0, prior_scale^2)
// on each stable-basis coefficient, plus log2(k+1) bits for the model index.
//
// Closed form: with design Phi (n x p), b = Phi^T y, M = (v/tau^2)I + Phi^T Phi,
//   -ln p(s|k) = n/2 ln(2 pi v) + 1/2 [ln det M - p ln(v/tau^2)]
//                + (y^T y - b^T M^{-1} b) / (2v).
// When mc_samples > 0 the same quantity is re-estimated by averaging the
// likelihood over prior draws; disagreement beyond 3 standard errors means
// one of the two routes is numerically broken and the call refuses to
// return a value.
inline CriterionScore mdl_mixture(const SweepInput& sweep, double prior_scale,
                                  std::size_t mc_samples) {
  sweep.validate();
  if (sweep.shared_variance_policy.kind != VariancePolicy::Kind::fixed)
    throw config_error("mdl_mixture: requires a fixed noise variance policy");
  if (!(prior_scale > 0.0)) throw config_error("mdl_mixture: prior_scale must be > 0");

  const double v = sweep.shared_variance_policy.value;
  const double tau2 = prior_scale * prior_scale;
  const double n = static_cast<double>(sweep.train_n);
  const double ln2 = std::numbers::ln2;
  Eigen::Map<const Eigen::VectorXd> y(sweep.train.y.data(),
                                      static_cast<Eigen::Index>(sweep.train.size()));
  const double yty = y.squaredNorm();

  CriterionScore score;
  score.criterion = Criterion::mdl_mixture;
  for (const auto& model : sweep.models) {
    const int p = model.degree + 1;
    Eigen::MatrixXd design =
        chebyshev_design(sweep.train.x, model.degree, sweep.train.support);
    const Eigen::VectorXd b = design.transpose() * y;
    Eigen::MatrixXd m = design.transpose() * design;
    m.diagonal().array() += v / tau2;
    Eigen::LDLT<Eigen::MatrixXd> ldlt(m);
    if (ldlt.info() != Eigen::Success)
      throw numeric_integrity_error("mdl_mixture: posterior precision factorization failed at k=" +
                                    std::to_string(model.degree));
    const double logdet_m = ldlt.vectorD().array().log().sum();
    const double quad = std::max(0.0, yty - b.dot(ldlt.solve(b)));
    const double neg_ln_p = 0.5 * n * std::log(2.0 * std::numbers::pi * v) +
                            0.5 * (logdet_m - p * std::log(v / tau2)) +
                            quad / (2.0 * v);

    if (mc_samples > 0) {
      rng::Stream draws(sweep.train.seed, "mixture-mc-k" + std::to_string(model.degree));
      const double base = -0.5 * n * std::log(2.0 * std::numbers::pi * v);
      double peak = -std::numeric_limits<double>::infinity();
      std::vector<double> log_like(mc_samples);
      Eigen::VectorXd theta(p);
      for (std::size_t j = 0; j < mc_samples; ++j) {
        for (int c = 0; c < p; ++c) theta(c) = prior_scale * draws.next_gaussian();
        const double ss = (y - design * theta).squaredNorm();
        log_like[j] = base - ss / (2.0 * v);
        peak = std::max(peak, log_like[j]);
      }
      double mean = 0.0, msq = 0.0;  // Welford, fixed draw order
      for (std::size_t j = 0; j < mc_samples; ++j) {
        const double w = std::exp(log_like[j] - peak);
        const double d = w - mean;
        mean += d / static_cast<double>(j + 1);
        msq += d * (w - mean);
      }
      const double se_mean =
          std::sqrt(msq / static_cast<double>(mc_samples - 1) / static_cast<double>(mc_samples));
      const double mc_neg_ln_p = -(peak + std::log(mean));
      const double se_ln = se_mean / mean;
      if (std::abs(mc_neg_ln_p - neg_ln_p) > 3.0 * se_ln)
        throw numeric_integrity_error(
            "mdl_mixture: closed form and Monte-Carlo estimate disagree at k=" +
            std::to_string(model.degree) + " (closed " + numio::format_double(neg_ln_p) +
            ", mc " + numio::format_double(mc_neg_ln_p) + ", 3se " +
            numio::format_double(3.0 * se_ln) + ")");
    }

    score.per_degree.emplace_back(model.degree,
                                  neg_ln_p / ln2 + std::log2(model.degree + 1.0));
  }
  detail::select_minimum(score);
  return score;
}

// Mean held-out MSE over folds. Fold membership is a pure function of the
// sample seed: a seeded permutation dealt round-robin, so fold sizes differ
// by at most one and reruns see identical folds.
inline CriterionScore cross_validation(const Sample& train, int k_min, int k_max,
                                       std::size_t folds, bool smoothing) {
  train.validate();
  if (k_min < 0 || k_max < k_min) throw config_error("cross_validation: invalid degree range");
  if (folds < 2) throw config_error("cross_validation: folds must be >= 2");
  const std::size_t n = train.size();
  if (folds > n) throw config_error("cross_validation: more folds than points");
  const std::size_t max_fold = (n + folds - 1) / folds;
  const std::size_t min_train = n - max_fold;
  if (min_train < static_cast<std::size_t>(k_max) + 1)
    throw config_error("cross_validation: a fold leaves only " + std::to_string(min_train) +
                       " training points, supporting degree at most " +
                       std::to_string(min_train == 0 ? 0 : min_train - 1) +
                       "; lower k_max=" + std::to_string(k_max));

  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  rng::Stream shuffler(train.seed, "cv-folds");
  for (std::size_t i = n - 1; i > 0; --i) {
    const std::size_t j = static_cast<std::size_t>(shuffler.next_unit() * (i + 1));
    std::swap(perm[i], perm[std::min(j, i)]);
  }
  std::vector<std::size_t> fold_of(n);
  for (std::size_t i = 0; i < n; ++i) fold_of[perm[i]] = i % folds;

  const std::size_t degrees = static_cast<std::size_t>(k_max - k_min) + 1;
  std::vector<double> totals(degrees, 0.0);
  for (std::size_t f = 0; f < folds; ++f) {
    Sample fit_part, holdout;
    fit_part.support = holdout.support = train.support;
    fit_part.role = holdout.role = Role::train;
    fit_part.seed = holdout.seed = train.seed;
    for (std::size_t i = 0; i < n; ++i) {
      Sample& dst = fold_of[i] == f ? holdout : fit_part;
      dst.x.push_back(train.x[i]);
      dst.y.push_back(train.y[i]);
    }
    for (std::size_t d = 0; d < degrees; ++d)
      totals[d] += mse(fit(fit_part, k_min + static_cast<int>(d)), holdout);
  }

  CriterionScore score;
  score.criterion = Criterion::cross_validation;
  for (std::size_t d = 0; d < degrees; ++d)
    score.per_degree.emplace_back(k_min + static_cast<int>(d),
                                  totals[d] / static_cast<double>(folds));

  if (smoothing && degrees > 1) {
    std::vector<double> smoothed(degrees);
    for (std::size_t d = 0; d < degrees; ++d) {
      double sum = score.per_degree[d].second;
      int count = 1;
      if (d > 0) { sum += score.per_degree[d - 1].second; ++count; }
      if (d + 1 < degrees) { sum += score.per_degree[d + 1].second; ++count; }
      smoothed[d] = sum / count;
    }
    for (std::size_t d = 0; d < degrees; ++d) score.per_degree[d].second = smoothed[d];
  }
  detail::select_minimum(score);
  return score;
}

// Expected excess code length against the true curve; a ground-truth ranking
// available only because the harness knows the source. Diagnostic, not a
// selector a practitioner could run.
inline CriterionScore oracle_kl(const SweepInput& sweep, const SourceSpec& source,
                                double n_future) {
  sweep.validate();
  if (sweep.shared_variance_policy.kind != VariancePolicy::Kind::fixed)
    throw config_error("oracle_kl: requires a fixed noise variance policy");
  const double v = sweep.shared_variance_policy.value;
  const SourceCurve g = SourceCurve::from_spec(source);
  CriterionScore score;
  score.criterion = Criterion::oracle_kl;
  for (const auto& model : sweep.models)
    score.per_degree.emplace_back(
        model.degree,
        kl_gaussian_regression([&g](double x) { return g(x); }, model, v, n_future));
  detail::select_minimum(score);
  return score;
}

// ---- serialization ----

// CSV rows `criterion,k,score` for every criterion in order, followed by one
// '#'-prefixed JSON summary line per criterion.
inline std::string criterion_scores_to_csv(const std::vector<CriterionScore>& scores) {
  std::string out = "criterion,k,score\n";
  for (const auto& s : scores) {
    const std::string name = to_string(s.criterion);
    for (const auto& [k, value] : s.per_degree) {
      out += name;
      out += ',';
      out += std::to_string(k);
      out += ',';
      out += numio::format_double(value);
      out += '\n';
    }
  }
  for (const auto& s : scores) {
    nlohmann::ordered_json j;
    j["criterion"] = to_string(s.criterion);
    j["selected_k"] = s.selected_k;
    j["tie_policy_applied"] = s.tie_policy_applied;
    out += "# " + j.dump() + '\n';
  }
  return out;
}

inline std::vector<CriterionScore> criterion_scores_from_csv(const std::string& text) {
  std::vector<CriterionScore> scores;
  auto find_or_add = [&scores](Criterion c) -> CriterionScore& {
    for (auto& s : scores)
      if (s.criterion == c) return s;
    scores.emplace_back();
    scores.back().criterion = c;
    return scores.back();
  };
  bool header_seen = false;
  for (const auto& line : numio::split_lines(text)) {
    if (line.empty()) continue;
    if (line[0] == '#') {
      const auto j = nlohmann::json::parse(line.substr(1));
      auto& s = find_or_add(criterion_from_string(j.at("criterion").get<std::string>()));
      s.selected_k = j.at("selected_k").get<int>();
      s.tie_policy_applied = j.at("tie_policy_applied").get<bool>();
      continue;
    }
    if (!header_seen) {
      if (line != "criterion,k,score")
        throw config_error("criteria csv: expected header 'criterion,k,score'");
      header_seen = true;
      continue;
    }
    auto cells = numio::split(line);
    if (cells.size() != 3) throw config_error("criteria csv: expected three columns");
    auto& s = find_or_add(criterion_from_string(cells[0]));
    s.per_degree.emplace_back(static_cast<int>(numio::parse_integer(cells[1])),
                              numio::parse_double(cells[2]));
  }
  return scores;
}

}  // namespace overfitlab

#pragma once

// Synthetic ground-truth curves and i.i.d. noisy samples drawn from them.
//
// Two source kinds: a Lorenz-attractor segment (z coordinate over a time
// window, tabulated by fixed-step RK4) and an exact polynomial. Samples place
// x uniformly on the support and add Gaussian noise to g(x); all randomness
// comes from purpose-keyed streams so a (spec, n, role, seed) tuple always
// reproduces the identical sample.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "overfitlab/errors.hpp"
#include "overfitlab/numio.hpp"
#include "overfitlab/rng.hpp"

namespace overfitlab {

struct Interval {
  double a = 0.0;
  double b = 1.0;
  double width() const { return b - a; }
};

enum class SourceKind { lorenz, polynomial };
enum class Role { train, test };

inline std::string_view to_string(Role r) { return r == Role::train ? "train" : "test"; }

struct SourceSpec {
  SourceKind kind = SourceKind::polynomial;
  std::vector<double> poly_coefficients;       // a0..ak, power basis
  Interval support{0.0, 10.0};
  double noise_variance = 1.0;                 // sigma^2
  std::array<double, 3> lorenz_params{10.0, 28.0, 8.0 / 3.0};   // (sigma, rho, beta)
  std::array<double, 3> lorenz_initial{1.0, 1.0, 1.0};
  std::array<double, 2> lorenz_time_window{30.0, 38.5};         // (t_start, t_end)
  double lorenz_step = 1e-3;

  void validate() const {
    if (!(support.a < support.b)) throw config_error("support: requires a < b");
    if (!(noise_variance >= 0.0)) throw config_error("noise_variance: must be >= 0");
    if (kind == SourceKind::polynomial) {
      if (poly_coefficients.empty())
        throw config_error("poly_coefficients: must be nonempty for polynomial sources");
    } else {
      if (!(lorenz_step > 0.0)) throw config_error("lorenz_step: must be > 0");
      const double span = lorenz_time_window[1] - lorenz_time_window[0];
      if (!(span / lorenz_step >= 1000.0))
        throw config_error("lorenz_time_window: window must cover at least 1000 steps");
      if (!(lorenz_time_window[0] >= 0.0))
        throw config_error("lorenz_time_window: t_start must be >= 0");
    }
  }
};

struct Sample {
  std::vector<double> x;
  std::vector<double> y;
  Interval support;
  Role role = Role::train;
  std::uint64_t seed = 0;

  std::size_t size() const { return x.size(); }

  void validate() const {
    if (x.empty() || x.size() != y.size()) throw config_error("sample: empty or ragged");
    for (double v : x)
      if (!(v >= support.a && v <= support.b))
        throw config_error("sample: x outside support");
  }

  // Content fingerprint; sweeps use it to assert all models share one sample.
  std::uint64_t digest() const {
    std::uint64_t h = 14695981039346656037ull;
    auto mix = [&h](double d) {
      std::uint64_t bits;
      static_assert(sizeof(bits) == sizeof(d));
      std::memcpy(&bits, &d, sizeof(bits));
      for (int i = 0; i < 8; ++i) {
        h ^= (bits >> (8 * i)) & 0xffu;
        h *= 1099511628211ull;
      }
    };
    for (double v : x) mix(v);
    for (double v : y) mix(v);
    return h;
  }
};

// Piecewise-linear table over strictly increasing x; clamps at the ends.
struct TabulatedCurve {
  std::vector<double> x;
  std::vector<double> g;

  double operator()(double xq) const {
    if (xq <= x.front()) return g.front();
    if (xq >= x.back()) return g.back();
    auto it = std::upper_bound(x.begin(), x.end(), xq);
    std::size_t i = static_cast<std::size_t>(it - x.begin());
    const double t = (xq - x[i - 1]) / (x[i] - x[i - 1]);
    return g[i - 1] + t * (g[i] - g[i - 1]);
  }
};

namespace detail {

inline std::array<double, 3> lorenz_rhs(const std::array<double, 3>& s,
                                        const std::array<double, 3>& p) {
  const auto [x, y, z] = s;
  const auto [sigma, rho, beta] = p;
  return {sigma * (y - x), x * (rho - z) - y, x * y - beta * z};
}

}  // namespace detail

// z coordinate of the Lorenz trajectory over the spec's time window, time
// mapped affinely onto the support. The z values are rescaled to [-10, 15]
// to give samples a fixed vertical range; near-constant trajectories
// (equilibria) are returned unscaled since they carry no shape to preserve.
inline TabulatedCurve lorenz_curve(const SourceSpec& spec) {
  spec.validate();
  if (spec.kind != SourceKind::lorenz) throw config_error("lorenz_curve: kind must be lorenz");

  const double h = spec.lorenz_step;
  const double t0 = spec.lorenz_time_window[0];
  const double t1 = spec.lorenz_time_window[1];
  const std::size_t total_steps = static_cast<std::size_t>(std::llround(t1 / h));
  const std::size_t first_kept = static_cast<std::size_t>(std::llround(t0 / h));

  std::array<double, 3> s = spec.lorenz_initial;
  std::vector<double> z;
  z.reserve(total_steps - first_kept + 1);
  if (first_kept == 0) z.push_back(s[2]);
  for (std::size_t step = 1; step <= total_steps; ++step) {
    const auto k1 = detail::lorenz_rhs(s, spec.lorenz_params);
    std::array<double, 3> s2, s3, s4;
    for (int i = 0; i < 3; ++i) s2[i] = s[i] + 0.5 * h * k1[i];
    const auto k2 = detail::lorenz_rhs(s2, spec.lorenz_params);
    for (int i = 0; i < 3; ++i) s3[i] = s[i] + 0.5 * h * k2[i];
    const auto k3 = detail::lorenz_rhs(s3, spec.lorenz_params);
    for (int i = 0; i < 3; ++i) s4[i] = s[i] + h * k3[i];
    const auto k4 = detail::lorenz_rhs(s4, spec.lorenz_params);
    for (int i = 0; i < 3; ++i)
      s[i] += (h / 6.0) * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    for (double v : s)
      if (!std::isfinite(v)) throw integration_divergence_error(step);
    if (step >= first_kept) z.push_back(s[2]);
  }

  const auto [zmin_it, zmax_it] = std::minmax_element(z.begin(), z.end());
  const double zmin = *zmin_it, zmax = *zmax_it;
  const double span = zmax - zmin;
  if (span > 1e-9 * std::max(1.0, std::abs(zmax))) {
    for (double& v : z) v = -10.0 + (v - zmin) * 25.0 / span;
  }

  TabulatedCurve curve;
  curve.g = std::move(z);
  curve.x.resize(curve.g.size());
  const std::size_t last = curve.x.size() - 1;
  for (std::size_t i = 0; i <= last; ++i) {
    const double t = static_cast<double>(i) / static_cast<double>(last);
    curve.x[i] = spec.support.a + t * spec.support.width();
  }
  return curve;
}

inline double poly_eval(const std::vector<double>& coefficients, double x) {
  double acc = 0.0;
  for (auto it = coefficients.rbegin(); it != coefficients.rend(); ++it) acc = acc * x + *it;
  return acc;
}

struct PolyCurve {
  std::vector<double> coefficients;
  double operator()(double x) const { return poly_eval(coefficients, x); }
};

inline PolyCurve poly_curve(const SourceSpec& spec) {
  spec.validate();
  if (spec.kind != SourceKind::polynomial)
    throw config_error("poly_curve: kind must be polynomial");
  return PolyCurve{spec.poly_coefficients};
}

// Uniform view over either source kind; construct once, evaluate many times.
class SourceCurve {
 public:
  static SourceCurve from_spec(const SourceSpec& spec) {
    if (spec.kind == SourceKind::lorenz) return SourceCurve(lorenz_curve(spec));
    return SourceCurve(poly_curve(spec));
  }

  explicit SourceCurve(TabulatedCurve t) : impl_(std::move(t)) {}
  explicit SourceCurve(PolyCurve p) : impl_(std::move(p)) {}

  double operator()(double x) const {
    return std::visit([x](const auto& f) { return f(x); }, impl_);
  }

  const TabulatedCurve* table() const { return std::get_if<TabulatedCurve>(&impl_); }

 private:
  std::variant<TabulatedCurve, PolyCurve> impl_;
};

// x stream and noise stream are keyed separately by role, so the test draw
// never perturbs the training draw for the same seed.
inline Sample draw_sample(const SourceSpec& spec, const SourceCurve& g, std::size_t n,
                          Role role, std::uint64_t seed) {
  if (n < 1) throw config_error("draw_sample: n must be >= 1");
  const std::string role_name(to_string(role));
  rng::Stream xs(seed, role_name + "-x");
  rng::Stream ys(seed, role_name + "-y");
  const double sd = std::sqrt(spec.noise_variance);

  Sample sample;
  sample.support = spec.support;
  sample.role = role;
  sample.seed = seed;
  sample.x.resize(n);
  sample.y.resize(n);
  for (std::size_t i = 0; i < n; ++i)
    sample.x[i] = spec.support.a + spec.support.width() * xs.next_unit();
  for (std::size_t i = 0; i < n; ++i)
    sample.y[i] = g(sample.x[i]) + sd * ys.next_gaussian();
  sample.validate();
  return sample;
}

inline Sample draw_sample(const SourceSpec& spec, std::size_t n, Role role,
                          std::uint64_t seed) {
  return draw_sample(spec, SourceCurve::from_spec(spec), n, role, seed);
}

// ---- defaults ----

// Quartic with peaks at x=2 and x=8 and a valley at x=5; the scale sets
// Var[g(x)] to 13 under uniform x on [0,10], so a noise variance of 1 puts
// the 0-degree generalization error at 14.
inline constexpr double kQuarticScale = 0.2668573977841086;

inline SourceSpec default_quartic_source() {
  SourceSpec spec;
  spec.kind = SourceKind::polynomial;
  spec.poly_coefficients = {0.0, 80.0 * kQuarticScale, -33.0 * kQuarticScale,
                            5.0 * kQuarticScale, -0.25 * kQuarticScale};
  spec.support = {0.0, 10.0};
  spec.noise_variance = 1.0;
  return spec;
}

inline SourceSpec default_lorenz_source() {
  SourceSpec spec;
  spec.kind = SourceKind::lorenz;
  spec.support = {0.0, 10.0};
  spec.noise_variance = 1.0;
  spec.lorenz_params = {10.0, 28.0, 8.0 / 3.0};
  spec.lorenz_initial = {1.0, 1.0, 1.0};
  spec.lorenz_time_window = {30.0, 38.5};
  spec.lorenz_step = 1e-3;
  return spec;
}

// ---- serialization ----

inline std::string to_string(SourceKind k) {
  return k == SourceKind::lorenz ? "lorenz" : "polynomial";
}

inline nlohmann::ordered_json source_spec_to_json(const SourceSpec& spec) {
  nlohmann::ordered_json j;
  j["kind"] = to_string(spec.kind);
  j["poly_coefficients"] = spec.poly_coefficients;
  j["support"] = {spec.support.a, spec.support.b};
  j["noise_variance"] = spec.noise_variance;
  j["lorenz_params"] = spec.lorenz_params;
  j["lorenz_initial"] = spec.lorenz_initial;
  j["lorenz_time_window"] = spec.lorenz_time_window;
  j["lorenz_step"] = spec.lorenz_step;
  return j;
}

inline SourceSpec source_spec_from_json(const nlohmann::json& j) {
  static const std::vector<std::string> known = {
      "kind",          "poly_coefficients", "support",     "noise_variance",
      "lorenz_params", "lorenz_initial",    "lorenz_time_window", "lorenz_step"};
  if (!j.is_object()) throw config_error("source spec: expected a JSON object");
  for (const auto& item : j.items()) {
    if (std::find(known.begin(), known.end(), item.key()) == known.end())
      throw config_error("source spec: unknown key '" + item.key() + "'");
  }
  SourceSpec spec;
  if (!j.contains("kind")) throw config_error("source spec: missing 'kind'");
  const std::string kind = j.at("kind").get<std::string>();
  if (kind == "lorenz") spec.kind = SourceKind::lorenz;
  else if (kind == "polynomial") spec.kind = SourceKind::polynomial;
  else throw config_error("source spec: kind must be 'lorenz' or 'polynomial'");
  if (j.contains("poly_coefficients"))
    spec.poly_coefficients = j.at("poly_coefficients").get<std::vector<double>>();
  if (j.contains("support")) {
    auto s = j.at("support").get<std::vector<double>>();
    if (s.size() != 2) throw config_error("source spec: support must be [a, b]");
    spec.support = {s[0], s[1]};
  }
  if (j.contains("noise_variance")) spec.noise_variance = j.at("noise_variance").get<double>();
  if (j.contains("lorenz_params"))
    spec.lorenz_params = j.at("lorenz_params").get<std::array<double, 3>>();
  if (j.contains("lorenz_initial"))
    spec.lorenz_initial = j.at("lorenz_initial").get<std::array<double, 3>>();
  if (j.contains("lorenz_time_window"))
    spec.lorenz_time_window = j.at("lorenz_time_window").get<std::array<double, 2>>();
  if (j.contains("lorenz_step")) spec.lorenz_step = j.at("lorenz_step").get<double>();
  spec.validate();
  return spec;
}

inline std::string sample_to_csv(const Sample& sample) {
  std::string out = "x,y\n";
  for (std::size_t i = 0; i < sample.size(); ++i) {
    out += numio::format_double(sample.x[i]);
    out += ',';
    out += numio::format_double(sample.y[i]);
    out += '\n';
  }
  return out;
}

// Reads back the point sequence; support/role/seed are context the caller
// supplies (the CSV stores data, not provenance).
inline Sample sample_from_csv(const std::string& text, Interval support, Role role,
                              std::uint64_t seed) {
  Sample sample;
  sample.support = support;
  sample.role = role;
  sample.seed = seed;
  bool header_seen = false;
  for (const auto& line : numio::split_lines(text)) {
    if (line.empty()) continue;
    if (!header_seen) {
      if (line != "x,y") throw config_error("sample csv: expected header 'x,y'");
      header_seen = true;
      continue;
    }
    auto cells = numio::split(line);
    if (cells.size() != 2) throw config_error("sample csv: expected two columns");
    sample.x.push_back(numio::parse_double(cells[0]));
    sample.y.push_back(numio::parse_double(cells[1]));
  }
  sample.validate();
  return sample;
}

}  // namespace overfitlab

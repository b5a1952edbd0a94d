#pragma once

// Generalization curves over a degree sweep and the landmarks used to judge
// a selection: the origin (error of the constant fit), the global optimum,
// the region of good generalization around it, false minima outside that
// region, and the degree from which the curve stays worse than the origin.

#include <cmath>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "overfitlab/errors.hpp"
#include "overfitlab/numio.hpp"
#include "overfitlab/polyfit.hpp"
#include "overfitlab/sources.hpp"

namespace overfitlab {

struct GenCurve {
  int k_min = 0;
  std::vector<double> errors;
  bool smoothed = false;

  int k_max() const { return k_min + static_cast<int>(errors.size()) - 1; }
  double at(int k) const { return errors[static_cast<std::size_t>(k - k_min)]; }

  void validate() const {
    if (errors.empty()) throw config_error("curve: empty");
    for (double e : errors)
      if (!(std::isfinite(e) && e > 0.0))
        throw config_error("curve: errors must be finite and positive");
  }
};

inline GenCurve generalization_curve(const Sample& train, const Sample& test, int k_min,
                                     int k_max) {
  if (k_min < 0 || k_max < k_min) throw config_error("curve: invalid degree range");
  test.validate();
  GenCurve curve;
  curve.k_min = k_min;
  curve.errors.reserve(static_cast<std::size_t>(k_max - k_min) + 1);
  for (int k = k_min; k <= k_max; ++k) curve.errors.push_back(mse(fit(train, k), test));
  curve.validate();
  return curve;
}

// Mean of each value with its existing neighbors; endpoints average two
// elements. Length and degree labels are preserved.
inline GenCurve smooth3(const GenCurve& curve) {
  curve.validate();
  GenCurve out = curve;
  out.smoothed = true;
  const std::size_t n = curve.errors.size();
  if (n == 1) return out;
  for (std::size_t i = 0; i < n; ++i) {
    double sum = curve.errors[i];
    int count = 1;
    if (i > 0) { sum += curve.errors[i - 1]; ++count; }
    if (i + 1 < n) { sum += curve.errors[i + 1]; ++count; }
    out.errors[i] = sum / count;
  }
  return out;
}

struct CriticalPoints {
  double origin_error = 0.0;
  int optimum_k = 0;
  double optimum_error = 0.0;
  std::pair<int, int> region_good{0, 0};  // inclusive degree interval
  std::vector<int> false_minima;
  std::optional<int> overfit_k;
  double threshold_used = 0.0;

  bool in_region(int k) const { return k >= region_good.first && k <= region_good.second; }
};

// Landmark extraction. The threshold is the geometric mean of origin and
// optimum error, i.e. "half way" on the log scale the curves are plotted on.
// Region membership admits errors equal to the optimum so a flat curve
// degenerates to the full range instead of an empty region.
inline CriticalPoints detect_critical_points(const GenCurve& curve) {
  curve.validate();
  const std::vector<double>& e = curve.errors;
  const std::size_t n = e.size();
  if (n < 2) throw config_error("critical points: curve must have at least 2 degrees");

  CriticalPoints cp;
  cp.origin_error = e.front();
  std::size_t opt = 0;
  for (std::size_t i = 1; i < n; ++i)
    if (e[i] < e[opt]) opt = i;
  cp.optimum_k = curve.k_min + static_cast<int>(opt);
  cp.optimum_error = e[opt];
  cp.threshold_used = std::sqrt(cp.origin_error * cp.optimum_error);

  auto in_region = [&](std::size_t i) {
    return e[i] < cp.threshold_used || e[i] == cp.optimum_error;
  };
  std::size_t lo = opt, hi = opt;
  while (lo > 0 && in_region(lo - 1)) --lo;
  while (hi + 1 < n && in_region(hi + 1)) ++hi;
  cp.region_good = {curve.k_min + static_cast<int>(lo), curve.k_min + static_cast<int>(hi)};

  for (std::size_t i = 1; i + 1 < n; ++i) {
    if (e[i - 1] > e[i] && e[i] < e[i + 1] && (i < lo || i > hi))
      cp.false_minima.push_back(curve.k_min + static_cast<int>(i));
  }

  std::size_t tail = n;  // first index of the suffix that stays above the origin
  while (tail > 0 && e[tail - 1] > cp.origin_error) --tail;
  if (tail < n) cp.overfit_k = curve.k_min + static_cast<int>(tail);
  return cp;
}

struct SelectionVerdict {
  bool in_region_good = false;
  double error_ratio_vs_optimum = 1.0;
  std::optional<int> distance_to_overfit;
  bool beyond_overfit = false;
};

inline SelectionVerdict evaluate_selection(const CriticalPoints& cp, int selected_k,
                                           const GenCurve& curve) {
  curve.validate();
  if (selected_k < curve.k_min || selected_k > curve.k_max())
    throw config_error("evaluate_selection: selected degree outside curve range");
  SelectionVerdict v;
  v.in_region_good = cp.in_region(selected_k);
  v.error_ratio_vs_optimum = curve.at(selected_k) / cp.optimum_error;
  if (cp.overfit_k) {
    v.distance_to_overfit = *cp.overfit_k - selected_k;
    v.beyond_overfit = selected_k >= *cp.overfit_k;
  }
  return v;
}

// ---- serialization ----

// `k,error` rows, with a third `smoothed_error` column when a smoothed
// companion curve over the same degrees is given.
inline std::string curve_to_csv(const GenCurve& curve, const GenCurve* smoothed = nullptr) {
  if (smoothed &&
      (smoothed->k_min != curve.k_min || smoothed->errors.size() != curve.errors.size()))
    throw config_error("curve csv: smoothed companion must cover the same degrees");
  std::string out = smoothed ? "k,error,smoothed_error\n" : "k,error\n";
  for (std::size_t i = 0; i < curve.errors.size(); ++i) {
    out += std::to_string(curve.k_min + static_cast<int>(i));
    out += ',';
    out += numio::format_double(curve.errors[i]);
    if (smoothed) {
      out += ',';
      out += numio::format_double(smoothed->errors[i]);
    }
    out += '\n';
  }
  return out;
}

inline std::pair<GenCurve, std::optional<GenCurve>> curve_from_csv(const std::string& text) {
  GenCurve raw;
  std::optional<GenCurve> smoothed;
  bool header_seen = false;
  bool has_smoothed = false;
  bool first_row = true;
  for (const auto& line : numio::split_lines(text)) {
    if (line.empty() || line[0] == '#') continue;
    if (!header_seen) {
      if (line == "k,error") has_smoothed = false;
      else if (line == "k,error,smoothed_error") has_smoothed = true;
      else throw config_error("curve csv: unrecognized header '" + line + "'");
      if (has_smoothed) {
        smoothed.emplace();
        smoothed->smoothed = true;
      }
      header_seen = true;
      continue;
    }
    auto cells = numio::split(line);
    if (cells.size() != (has_smoothed ? 3u : 2u))
      throw config_error("curve csv: wrong column count");
    const int k = static_cast<int>(numio::parse_integer(cells[0]));
    if (first_row) {
      raw.k_min = k;
      if (smoothed) smoothed->k_min = k;
      first_row = false;
    } else if (k != raw.k_min + static_cast<int>(raw.errors.size())) {
      throw config_error("curve csv: degrees must be contiguous");
    }
    raw.errors.push_back(numio::parse_double(cells[1]));
    if (smoothed) smoothed->errors.push_back(numio::parse_double(cells[2]));
  }
  raw.validate();
  if (smoothed) smoothed->validate();
  return {std::move(raw), std::move(smoothed)};
}

inline nlohmann::ordered_json critical_points_to_json(const CriticalPoints& cp) {
  nlohmann::ordered_json j;
  j["origin_error"] = cp.origin_error;
  j["optimum_k"] = cp.optimum_k;
  j["optimum_error"] = cp.optimum_error;
  j["region_good"] = {cp.region_good.first, cp.region_good.second};
  j["false_minima"] = cp.false_minima;
  if (cp.overfit_k) j["overfit_k"] = *cp.overfit_k;
  else j["overfit_k"] = nullptr;
  j["threshold_used"] = cp.threshold_used;
  return j;
}

inline CriticalPoints critical_points_from_json(const nlohmann::json& j) {
  CriticalPoints cp;
  cp.origin_error = j.at("origin_error").get<double>();
  cp.optimum_k = j.at("optimum_k").get<int>();
  cp.optimum_error = j.at("optimum_error").get<double>();
  auto region = j.at("region_good").get<std::vector<int>>();
  if (region.size() != 2) throw config_error("critical points json: region_good must be [lo, hi]");
  cp.region_good = {region[0], region[1]};
  cp.false_minima = j.at("false_minima").get<std::vector<int>>();
  if (!j.at("overfit_k").is_null()) cp.overfit_k = j.at("overfit_k").get<int>();
  cp.threshold_used = j.at("threshold_used").get<double>();
  return cp;
}

}  // namespace overfitlab

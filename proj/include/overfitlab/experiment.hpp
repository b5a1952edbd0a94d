#pragma once

// Experiment orchestration: a config record binding a source, sample sizes,
// a degree sweep, seeds, and criterion settings; a seed-parallel runner that
// writes per-seed CSVs plus an aggregate JSON; plot-data emission; and the
// per-criterion comparison table.
//
// Determinism contract: every output byte is a pure function of the config.
// Seeds are computed in a worker pool, but files are written in seed order
// from the calling thread, and all reductions have fixed order.

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <optional>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "overfitlab/analysis.hpp"
#include "overfitlab/criteria.hpp"
#include "overfitlab/errors.hpp"
#include "overfitlab/numio.hpp"
#include "overfitlab/sources.hpp"

namespace overfitlab {

struct ExperimentConfig {
  SourceSpec source;
  std::size_t n_train = 0;
  std::size_t n_test = 0;
  int k_min = 0;
  int k_max = 0;
  std::vector<std::uint64_t> seeds;
  std::vector<Criterion> criteria_enabled{kAllCriteria.begin(), kAllCriteria.end()};
  std::size_t cv_folds = 10;
  bool cv_smoothing = true;
  double mixture_prior_scale = 10.0;
  std::size_t mixture_mc_samples = 0;
  std::filesystem::path output_dir = "out";

  void validate() const {
    source.validate();
    if (k_min < 0 || k_max < k_min) throw config_error("degree_range: must be nonempty with k_min >= 0");
    if (n_train < static_cast<std::size_t>(k_max) + 1)
      throw config_error("n_train: must be >= k_max + 1 = " + std::to_string(k_max + 1));
    if (n_test < 1) throw config_error("n_test: must be >= 1");
    if (seeds.empty()) throw config_error("seeds: must be nonempty");
    for (Criterion c : criteria_enabled) {
      if (std::count(criteria_enabled.begin(), criteria_enabled.end(), c) > 1)
        throw config_error("criteria_enabled: duplicate entry " + to_string(c));
    }
  }

  bool enabled(Criterion c) const {
    return std::find(criteria_enabled.begin(), criteria_enabled.end(), c) !=
           criteria_enabled.end();
  }
};

inline nlohmann::ordered_json config_to_json(const ExperimentConfig& config) {
  nlohmann::ordered_json j;
  j["source"] = source_spec_to_json(config.source);
  j["n_train"] = config.n_train;
  j["n_test"] = config.n_test;
  j["degree_range"] = {config.k_min, config.k_max};
  j["seeds"] = config.seeds;
  std::vector<std::string> names;
  for (Criterion c : config.criteria_enabled) names.push_back(to_string(c));
  j["criteria_enabled"] = names;
  j["cv_folds"] = config.cv_folds;
  j["cv_smoothing"] = config.cv_smoothing;
  j["mixture_prior_scale"] = config.mixture_prior_scale;
  j["mixture_mc_samples"] = config.mixture_mc_samples;
  j["output_dir"] = config.output_dir.string();
  return j;
}

inline ExperimentConfig config_from_json(const nlohmann::json& j) {
  static const std::vector<std::string> known = {
      "source",   "n_train",  "n_test",   "degree_range",        "seeds",
      "criteria_enabled", "cv_folds", "cv_smoothing", "mixture_prior_scale",
      "mixture_mc_samples", "output_dir"};
  if (!j.is_object()) throw config_error("config: expected a JSON object");
  for (const auto& item : j.items())
    if (std::find(known.begin(), known.end(), item.key()) == known.end())
      throw config_error("config: unknown key '" + item.key() + "'");
  ExperimentConfig config;
  if (!j.contains("source")) throw config_error("config: missing 'source'");
  config.source = source_spec_from_json(j.at("source"));
  if (!j.contains("n_train")) throw config_error("config: missing 'n_train'");
  config.n_train = j.at("n_train").get<std::size_t>();
  if (!j.contains("n_test")) throw config_error("config: missing 'n_test'");
  config.n_test = j.at("n_test").get<std::size_t>();
  if (!j.contains("degree_range")) throw config_error("config: missing 'degree_range'");
  auto range = j.at("degree_range").get<std::vector<int>>();
  if (range.size() != 2) throw config_error("config: degree_range must be [k_min, k_max]");
  config.k_min = range[0];
  config.k_max = range[1];
  if (!j.contains("seeds")) throw config_error("config: missing 'seeds'");
  config.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
  if (j.contains("criteria_enabled")) {
    config.criteria_enabled.clear();
    for (const auto& name : j.at("criteria_enabled"))
      config.criteria_enabled.push_back(criterion_from_string(name.get<std::string>()));
  }
  if (j.contains("cv_folds")) config.cv_folds = j.at("cv_folds").get<std::size_t>();
  if (j.contains("cv_smoothing")) config.cv_smoothing = j.at("cv_smoothing").get<bool>();
  if (j.contains("mixture_prior_scale"))
    config.mixture_prior_scale = j.at("mixture_prior_scale").get<double>();
  if (j.contains("mixture_mc_samples"))
    config.mixture_mc_samples = j.at("mixture_mc_samples").get<std::size_t>();
  if (j.contains("output_dir"))
    config.output_dir = j.at("output_dir").get<std::string>();
  config.validate();
  return config;
}

struct SeedResult {
  std::uint64_t seed = 0;
  Sample train;
  Sample test;
  GenCurve curve;             // raw generalization curve
  GenCurve smoothed_curve;    // smooth3 companion, written alongside
  CriticalPoints critical;    // extracted from the raw curve
  std::vector<CriterionScore> scores;
  std::vector<std::pair<Criterion, SelectionVerdict>> verdicts;
};

// All per-seed computation; pure given (config, curve, seed).
inline SeedResult compute_seed(const ExperimentConfig& config, const SourceCurve& g,
                               std::uint64_t seed) {
  SeedResult result;
  result.seed = seed;
  result.train = draw_sample(config.source, g, config.n_train, Role::train, seed);
  result.test = draw_sample(config.source, g, config.n_test, Role::test, seed);
  result.curve = generalization_curve(result.train, result.test, config.k_min, config.k_max);
  result.smoothed_curve = smooth3(result.curve);
  result.critical = detect_critical_points(result.curve);

  const bool needs_sweep = config.enabled(Criterion::aic) ||
                           config.enabled(Criterion::mdl_two_part) ||
                           config.enabled(Criterion::mdl_mixture) ||
                           config.enabled(Criterion::oracle_kl);
  SweepInput sweep;
  if (needs_sweep)
    sweep = make_sweep(result.train, config.k_min, config.k_max, VariancePolicy::per_model());

  for (Criterion c : kAllCriteria) {
    if (!config.enabled(c)) continue;
    switch (c) {
      case Criterion::aic:
        result.scores.push_back(aic(sweep));
        break;
      case Criterion::mdl_two_part:
        result.scores.push_back(mdl_two_part(sweep));
        break;
      case Criterion::mdl_mixture: {
        SweepInput fixed = sweep;
        fixed.shared_variance_policy = VariancePolicy::fixed(config.source.noise_variance);
        result.scores.push_back(
            mdl_mixture(fixed, config.mixture_prior_scale, config.mixture_mc_samples));
        break;
      }
      case Criterion::cross_validation:
        result.scores.push_back(cross_validation(result.train, config.k_min, config.k_max,
                                                 config.cv_folds, config.cv_smoothing));
        break;
      case Criterion::oracle_kl: {
        SweepInput fixed = sweep;
        fixed.shared_variance_policy = VariancePolicy::fixed(config.source.noise_variance);
        result.scores.push_back(
            oracle_kl(fixed, config.source, static_cast<double>(config.n_test)));
        break;
      }
    }
  }
  for (const auto& s : result.scores)
    result.verdicts.emplace_back(s.criterion,
                                 evaluate_selection(result.critical, s.selected_k, result.curve));
  return result;
}

inline std::size_t worker_count(std::size_t jobs) {
  std::size_t w = std::thread::hardware_concurrency();
  if (w == 0) w = 1;
  if (const char* env = std::getenv("OVERFITLAB_WORKERS")) {
    const long long parsed = numio::parse_integer(env);
    if (parsed < 1) throw config_error("OVERFITLAB_WORKERS: must be >= 1");
    w = static_cast<std::size_t>(parsed);
  }
  return std::max<std::size_t>(1, std::min(w, jobs));
}

namespace detail {

// Runs fn(i) for i in [0, jobs) on a pool; rethrows the failure of the
// lowest job index so error reporting is as deterministic as the results.
template <typename Fn>
void parallel_for_jobs(std::size_t jobs, const Fn& fn) {
  const std::size_t workers = worker_count(jobs);
  if (workers == 1) {
    for (std::size_t i = 0; i < jobs; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> failures(jobs);
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (std::size_t t = 0; t < workers; ++t) {
    pool.emplace_back([&] {
      for (;;) {
        const std::size_t i = next.fetch_add(1);
        if (i >= jobs) return;
        try {
          fn(i);
        } catch (...) {
          failures[i] = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  for (const auto& failure : failures)
    if (failure) std::rethrow_exception(failure);
}

}  // namespace detail

struct ExperimentReport {
  ExperimentConfig config;
  std::vector<SeedResult> results;  // seed order, matching config.seeds
  nlohmann::ordered_json aggregate;
};

inline nlohmann::ordered_json aggregate_report(const ExperimentConfig& config,
                                               const std::vector<SeedResult>& results) {
  nlohmann::ordered_json per_criterion = nlohmann::ordered_json::object();
  for (Criterion c : kAllCriteria) {
    if (!config.enabled(c)) continue;
    std::size_t in_region = 0, beyond = 0, total = 0;
    std::vector<double> ratios;
    for (const auto& r : results) {
      for (const auto& [criterion, verdict] : r.verdicts) {
        if (criterion != c) continue;
        ++total;
        in_region += verdict.in_region_good ? 1 : 0;
        beyond += verdict.beyond_overfit ? 1 : 0;
        ratios.push_back(verdict.error_ratio_vs_optimum);
      }
    }
    if (total == 0) continue;
    std::sort(ratios.begin(), ratios.end());
    const std::size_t m = ratios.size();
    const double median =
        m % 2 == 1 ? ratios[m / 2] : 0.5 * (ratios[m / 2 - 1] + ratios[m / 2]);
    nlohmann::ordered_json row;
    row["in_region_good_rate"] = static_cast<double>(in_region) / static_cast<double>(total);
    row["beyond_overfit_rate"] = static_cast<double>(beyond) / static_cast<double>(total);
    row["median_error_ratio"] = median;
    per_criterion[to_string(c)] = row;
  }
  nlohmann::ordered_json j;
  j["per_criterion"] = per_criterion;
  return j;
}

inline std::filesystem::path seed_dir(const std::filesystem::path& out, std::uint64_t seed) {
  return out / ("seed_" + std::to_string(seed));
}

// Runs every seed, writes <out>/seed_<s>/{curve.csv, criteria.csv} and
// <out>/aggregate.json, and returns everything in memory.
inline ExperimentReport run_experiment(const ExperimentConfig& config) {
  config.validate();
  const SourceCurve g = SourceCurve::from_spec(config.source);

  ExperimentReport report;
  report.config = config;
  report.results.resize(config.seeds.size());
  detail::parallel_for_jobs(config.seeds.size(), [&](std::size_t i) {
    report.results[i] = compute_seed(config, g, config.seeds[i]);
  });

  for (const auto& r : report.results) {
    const auto dir = seed_dir(config.output_dir, r.seed);
    std::filesystem::create_directories(dir);
    numio::write_text_file(dir / "curve.csv", curve_to_csv(r.curve, &r.smoothed_curve));
    numio::write_text_file(dir / "criteria.csv", criterion_scores_to_csv(r.scores));
  }
  report.aggregate = aggregate_report(config, report.results);
  std::filesystem::create_directories(config.output_dir);
  numio::write_text_file(config.output_dir / "aggregate.json",
                         report.aggregate.dump(2) + "\n");
  return report;
}

// Draws and writes only the samples: <out>/seed_<s>/{train.csv, test.csv}.
inline void generate_samples(const ExperimentConfig& config) {
  config.validate();
  const SourceCurve g = SourceCurve::from_spec(config.source);
  for (std::uint64_t seed : config.seeds) {
    const auto dir = seed_dir(config.output_dir, seed);
    std::filesystem::create_directories(dir);
    numio::write_text_file(dir / "train.csv",
                           sample_to_csv(draw_sample(config.source, g, config.n_train,
                                                     Role::train, seed)));
    numio::write_text_file(dir / "test.csv",
                           sample_to_csv(draw_sample(config.source, g, config.n_test,
                                                     Role::test, seed)));
  }
}

// Reads one seed's outputs back; verdicts are recomputed from the raw curve.
struct LoadedSeed {
  std::uint64_t seed = 0;
  GenCurve curve;
  std::optional<GenCurve> smoothed_curve;
  CriticalPoints critical;
  std::vector<CriterionScore> scores;
};

inline LoadedSeed load_seed(const std::filesystem::path& out, std::uint64_t seed) {
  const auto dir = seed_dir(out, seed);
  LoadedSeed loaded;
  loaded.seed = seed;
  auto [raw, smoothed] = curve_from_csv(numio::read_text_file(dir / "curve.csv"));
  loaded.curve = std::move(raw);
  loaded.smoothed_curve = std::move(smoothed);
  loaded.critical = detect_critical_points(loaded.curve);
  const auto criteria_path = dir / "criteria.csv";
  if (std::filesystem::exists(criteria_path))
    loaded.scores = criterion_scores_from_csv(numio::read_text_file(criteria_path));
  return loaded;
}

enum class PlotKind { curve, criteria_overlay };

inline PlotKind plot_kind_from_string(std::string_view name) {
  if (name == "curve") return PlotKind::curve;
  if (name == "criteria_overlay") return PlotKind::criteria_overlay;
  throw config_error("plotdata: unknown section '" + std::string(name) +
                     "' (expected curve or criteria_overlay)");
}

// Whitespace-separated numeric columns with '#' comments, one row per degree.
// curve: k and test MSE. criteria_overlay: k, test MSE, then one column per
// criterion present, in canonical order.
inline std::string render_plot_data(const LoadedSeed& seed, PlotKind which) {
  std::string out;
  out += "# y-axis: log scale recommended\n";
  if (which == PlotKind::curve) {
    out += "# columns: k test_mse\n";
    for (std::size_t i = 0; i < seed.curve.errors.size(); ++i) {
      out += std::to_string(seed.curve.k_min + static_cast<int>(i));
      out += ' ';
      out += numio::format_double(seed.curve.errors[i]);
      out += '\n';
    }
    return out;
  }

  std::vector<const CriterionScore*> columns;
  std::string header = "# columns: k test_mse";
  for (Criterion c : kAllCriteria) {
    for (const auto& s : seed.scores) {
      if (s.criterion != c) continue;
      if (s.per_degree.size() != seed.curve.errors.size() ||
          s.per_degree.front().first != seed.curve.k_min)
        throw config_error("plotdata: criterion " + to_string(c) +
                           " does not cover the curve's degree range");
      columns.push_back(&s);
      header += ' ' + to_string(c);
    }
  }
  out += header + '\n';
  for (std::size_t i = 0; i < seed.curve.errors.size(); ++i) {
    out += std::to_string(seed.curve.k_min + static_cast<int>(i));
    out += ' ';
    out += numio::format_double(seed.curve.errors[i]);
    for (const auto* s : columns) {
      out += ' ';
      out += numio::format_double(s->per_degree[i].second);
    }
    out += '\n';
  }
  return out;
}

struct MethodRow {
  Criterion criterion = Criterion::aic;
  double in_region_good_rate = 0.0;
  double beyond_overfit_rate = 0.0;
  std::optional<double> mean_distance_to_overfit;
  double median_error_ratio = 1.0;
};

// Per-criterion quality table over seeds, best methods first: a method must
// above all never select beyond the overfitting point, then should land in
// the region of good generalization as often as possible.
inline std::vector<MethodRow> compare_methods(const std::vector<LoadedSeed>& seeds) {
  if (seeds.size() < 2) throw config_error("compare: needs at least 2 seeds");
  std::vector<MethodRow> rows;
  for (Criterion c : kAllCriteria) {
    std::size_t total = 0, in_region = 0, beyond = 0;
    std::vector<double> ratios;
    double distance_sum = 0.0;
    std::size_t distance_count = 0;
    for (const auto& seed : seeds) {
      for (const auto& s : seed.scores) {
        if (s.criterion != c) continue;
        const SelectionVerdict v =
            evaluate_selection(seed.critical, s.selected_k, seed.curve);
        ++total;
        in_region += v.in_region_good ? 1 : 0;
        beyond += v.beyond_overfit ? 1 : 0;
        ratios.push_back(v.error_ratio_vs_optimum);
        if (v.distance_to_overfit) {
          distance_sum += *v.distance_to_overfit;
          ++distance_count;
        }
      }
    }
    if (total == 0) continue;
    MethodRow row;
    row.criterion = c;
    row.in_region_good_rate = static_cast<double>(in_region) / static_cast<double>(total);
    row.beyond_overfit_rate = static_cast<double>(beyond) / static_cast<double>(total);
    if (distance_count > 0) row.mean_distance_to_overfit = distance_sum / distance_count;
    std::sort(ratios.begin(), ratios.end());
    const std::size_t m = ratios.size();
    row.median_error_ratio =
        m % 2 == 1 ? ratios[m / 2] : 0.5 * (ratios[m / 2 - 1] + ratios[m / 2]);
    rows.push_back(row);
  }
  std::stable_sort(rows.begin(), rows.end(), [](const MethodRow& a, const MethodRow& b) {
    if (a.beyond_overfit_rate != b.beyond_overfit_rate)
      return a.beyond_overfit_rate < b.beyond_overfit_rate;
    return a.in_region_good_rate > b.in_region_good_rate;
  });
  return rows;
}

inline nlohmann::ordered_json comparison_to_json(const std::vector<MethodRow>& rows) {
  nlohmann::ordered_json out = nlohmann::ordered_json::array();
  for (const auto& row : rows) {
    nlohmann::ordered_json j;
    j["criterion"] = to_string(row.criterion);
    j["in_region_good_rate"] = row.in_region_good_rate;
    j["beyond_overfit_rate"] = row.beyond_overfit_rate;
    if (row.mean_distance_to_overfit) j["mean_distance_to_overfit"] = *row.mean_distance_to_overfit;
    else j["mean_distance_to_overfit"] = nullptr;
    j["median_error_ratio"] = row.median_error_ratio;
    out.push_back(j);
  }
  return out;
}

}  // namespace overfitlab

// Command-line front end for the overfitting laboratory.
//
// Subcommands:
//   generate  draw train/test samples per seed and write them as CSV
//   sweep     run the full experiment: curves, criteria, verdicts, aggregate
//   analyze   re-extract critical points from previously written curves
//   compare   rank criteria across seeds from previously written outputs
//   plotdata  emit plot-ready columns for one seed
//
// Every subcommand takes --config <json>. Scalar config fields can be
// overridden with a flag of the same name; --out is shorthand for
// --output_dir. Exit codes: 0 ok, 2 configuration error, 3 numeric
// integrity failure.

#include <cstdint>
#include <exception>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "overfitlab/experiment.hpp"

namespace {

struct CommonArgs {
  std::string config_path;
  std::optional<std::size_t> seed_index;
  std::optional<std::string> out;
  std::optional<std::string> output_dir;
  std::optional<std::size_t> n_train;
  std::optional<std::size_t> n_test;
  std::optional<std::size_t> cv_folds;
  std::optional<bool> cv_smoothing;
  std::optional<double> mixture_prior_scale;
  std::optional<std::size_t> mixture_mc_samples;
};

void add_common_options(CLI::App* cmd, CommonArgs* args) {
  cmd->add_option("--config", args->config_path, "experiment config JSON file")
      ->required();
  cmd->add_option("--seed-index", args->seed_index,
                  "restrict the run to the i-th seed of the config's seed list");
  cmd->add_option("--out", args->out, "output directory (overrides output_dir)");
  cmd->add_option("--output_dir", args->output_dir, "override config field output_dir");
  cmd->add_option("--n_train", args->n_train, "override config field n_train");
  cmd->add_option("--n_test", args->n_test, "override config field n_test");
  cmd->add_option("--cv_folds", args->cv_folds, "override config field cv_folds");
  cmd->add_option("--cv_smoothing", args->cv_smoothing, "override config field cv_smoothing");
  cmd->add_option("--mixture_prior_scale", args->mixture_prior_scale,
                  "override config field mixture_prior_scale");
  cmd->add_option("--mixture_mc_samples", args->mixture_mc_samples,
                  "override config field mixture_mc_samples");
}

overfitlab::ExperimentConfig load_config(const CommonArgs& args) {
  const std::string text = overfitlab::numio::read_text_file(args.config_path);
  nlohmann::json parsed;
  try {
    parsed = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw overfitlab::config_error(std::string("config: invalid JSON: ") + e.what());
  }
  overfitlab::ExperimentConfig config = overfitlab::config_from_json(parsed);
  if (args.n_train) config.n_train = *args.n_train;
  if (args.n_test) config.n_test = *args.n_test;
  if (args.cv_folds) config.cv_folds = *args.cv_folds;
  if (args.cv_smoothing) config.cv_smoothing = *args.cv_smoothing;
  if (args.mixture_prior_scale) config.mixture_prior_scale = *args.mixture_prior_scale;
  if (args.mixture_mc_samples) config.mixture_mc_samples = *args.mixture_mc_samples;
  if (args.output_dir) config.output_dir = *args.output_dir;
  if (args.out) config.output_dir = *args.out;
  if (args.seed_index) {
    if (*args.seed_index >= config.seeds.size())
      throw overfitlab::config_error("seed-index: config has only " +
                                     std::to_string(config.seeds.size()) + " seeds");
    config.seeds = {config.seeds[*args.seed_index]};
  }
  config.validate();
  return config;
}

void run_analyze(const overfitlab::ExperimentConfig& config) {
  for (std::uint64_t seed : config.seeds) {
    const auto loaded = overfitlab::load_seed(config.output_dir, seed);
    const auto dir = overfitlab::seed_dir(config.output_dir, seed);
    overfitlab::numio::write_text_file(
        dir / "critical_points.json",
        overfitlab::critical_points_to_json(loaded.critical).dump(2) + "\n");
    std::cout << "seed " << seed << ": optimum_k=" << loaded.critical.optimum_k
              << " region_good=[" << loaded.critical.region_good.first << ","
              << loaded.critical.region_good.second << "]"
              << " overfit_k="
              << (loaded.critical.overfit_k ? std::to_string(*loaded.critical.overfit_k)
                                            : std::string("none"))
              << "\n";
  }
}

void run_compare(const overfitlab::ExperimentConfig& config) {
  std::vector<overfitlab::LoadedSeed> seeds;
  seeds.reserve(config.seeds.size());
  for (std::uint64_t seed : config.seeds)
    seeds.push_back(overfitlab::load_seed(config.output_dir, seed));
  const auto rows = overfitlab::compare_methods(seeds);
  const auto table = overfitlab::comparison_to_json(rows);
  overfitlab::numio::write_text_file(config.output_dir / "comparison.json",
                                     table.dump(2) + "\n");
  std::cout << "criterion in_region_good_rate beyond_overfit_rate "
               "mean_distance_to_overfit median_error_ratio\n";
  for (const auto& row : rows) {
    std::cout << overfitlab::to_string(row.criterion) << ' ' << row.in_region_good_rate
              << ' ' << row.beyond_overfit_rate << ' ';
    if (row.mean_distance_to_overfit) std::cout << *row.mean_distance_to_overfit;
    else std::cout << "n/a";
    std::cout << ' ' << row.median_error_ratio << "\n";
  }
}

void run_plotdata(const overfitlab::ExperimentConfig& config, const std::string& which) {
  const auto kind = overfitlab::plot_kind_from_string(which);
  if (config.seeds.size() != 1)
    throw overfitlab::config_error("plotdata: select one seed with --seed-index");
  const std::uint64_t seed = config.seeds.front();
  const auto loaded = overfitlab::load_seed(config.output_dir, seed);
  const auto path = config.output_dir /
                    ("plot_" + which + "_seed_" + std::to_string(seed) + ".dat");
  overfitlab::numio::write_text_file(path, overfitlab::render_plot_data(loaded, kind));
  std::cout << path.string() << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"overfitting laboratory: generalization curves and model-selection criteria"};
  app.require_subcommand(1);

  CommonArgs args;
  std::string which = "curve";

  CLI::App* generate = app.add_subcommand("generate", "draw and write train/test samples");
  CLI::App* sweep = app.add_subcommand("sweep", "run the full experiment over all seeds");
  CLI::App* analyze = app.add_subcommand("analyze", "extract critical points from written curves");
  CLI::App* compare = app.add_subcommand("compare", "rank criteria across seeds");
  CLI::App* plotdata = app.add_subcommand("plotdata", "emit plot-ready columns for one seed");
  for (CLI::App* cmd : {generate, sweep, analyze, compare, plotdata})
    add_common_options(cmd, &args);
  plotdata->add_option("--which", which, "plot section: curve or criteria_overlay");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    // Help/version requests land here too; they are not errors.
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    const overfitlab::ExperimentConfig config = load_config(args);
    if (generate->parsed()) {
      overfitlab::generate_samples(config);
    } else if (sweep->parsed()) {
      const auto report = overfitlab::run_experiment(config);
      std::cout << report.aggregate.dump(2) << "\n";
    } else if (analyze->parsed()) {
      run_analyze(config);
    } else if (compare->parsed()) {
      run_compare(config);
    } else if (plotdata->parsed()) {
      if (!args.seed_index && config.seeds.size() > 1)
        throw overfitlab::config_error("plotdata: select one seed with --seed-index");
      run_plotdata(config, which);
    }
  } catch (const overfitlab::config_error& e) {
    std::cerr << "configuration error: " << e.what() << "\n";
    return 2;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "configuration error: " << e.what() << "\n";
    return 2;
  } catch (const overfitlab::numeric_integrity_error& e) {
    std::cerr << "numeric integrity error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

// Command-line driver: train / infer / bench / scale / dp-sweep / fetch.
//
// Exit codes: 0 success, 2 configuration error, 3 data error, 4 transport
// error, 5 internal error.

#include <cstdio>
#include <cstdlib>
#include <exception>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "flynn/classifier.hpp"
#include "flynn/config.hpp"
#include "flynn/csv.hpp"
#include "flynn/error.hpp"
#include "flynn/experiments.hpp"
#include "flynn/fetch.hpp"
#include "flynn/model_io.hpp"
#include "flynn/results.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitData = 3;
constexpr int kExitTransport = 4;
constexpr int kExitInternal = 5;

std::string default_cache_dir() {
  if (const char* env = std::getenv("FLYNN_CACHE_DIR")) return env;
  return ".flynn-cache";
}

struct TrainArgs {
  std::string data_path;
  std::uint32_t label_column = 0;
  bool has_header = false;
  std::string model_path;
  std::uint32_t m = 1000;
  std::uint32_t s = 4;
  std::uint32_t rho = 32;
  std::string gamma = "0.5";
  std::uint64_t seed = 1;
  std::string hash = "fly";
};

int cmd_train(const TrainArgs& args) {
  const flynn::Dataset data =
      flynn::load_csv(args.data_path, args.label_column, args.has_header);
  flynn::FlyNnModel model =
      args.hash == "sim"
          ? flynn::train_sbfc(data, args.m, args.seed, args.gamma)
          : flynn::train(data, args.seed, args.m, args.s, args.rho,
                         args.gamma);
  flynn::save_model(model, args.model_path);
  std::printf("trained %s model on %zu rows (%u classes) -> %s\n",
              args.hash.c_str(), data.size(), data.num_classes(),
              args.model_path.c_str());
  return kExitOk;
}

struct InferArgs {
  std::string model_path;
  std::string data_path;
  std::uint32_t label_column = 0;
  bool has_header = false;
  bool no_labels = false;
  std::string out_path;
};

int cmd_infer(const InferArgs& args) {
  const flynn::FlyNnModel model = flynn::load_model(args.model_path);

  // With --no-labels the CSV is features-only; otherwise the label column is
  // dropped and accuracy is reported.
  std::vector<std::vector<double>> rows;
  std::vector<std::string> true_labels;
  if (args.no_labels) {
    std::ifstream in(args.data_path);
    if (!in)
      throw flynn::DataError("cannot open '" + args.data_path + "'");
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      if (line_no == 1 && args.has_header) continue;
      if (line.empty()) continue;
      std::vector<double> row;
      std::stringstream ss(line);
      std::string cell;
      while (std::getline(ss, cell, ','))
        row.push_back(flynn::detail::parse_double(cell, line_no));
      rows.push_back(std::move(row));
    }
  } else {
    const flynn::Dataset data =
        flynn::load_csv(args.data_path, args.label_column, args.has_header);
    for (std::size_t i = 0; i < data.size(); ++i) {
      rows.emplace_back(data.row(i).begin(), data.row(i).end());
      true_labels.push_back(data.label_table()[data.label(i)]);
    }
  }

  std::ofstream out(args.out_path);
  if (!out) throw flynn::DataError("cannot write '" + args.out_path + "'");
  out << "row,predicted_label";
  for (const auto& label : model.label_table()) out << ",score_" << label;
  out << '\n';
  std::size_t correct = 0;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto pred = flynn::infer(model, rows[i]);
    out << i << ',' << model.label_table()[pred.label_index];
    for (double score : pred.scores.per_class)
      out << ',' << flynn::format_double(score);
    out << '\n';
    if (!true_labels.empty() &&
        model.label_table()[pred.label_index] == true_labels[i])
      ++correct;
  }
  if (!out) throw flynn::DataError("write failed for '" + args.out_path + "'");
  if (!true_labels.empty())
    std::printf("accuracy %.4f over %zu rows -> %s\n",
                static_cast<double>(correct) / rows.size(), rows.size(),
                args.out_path.c_str());
  else
    std::printf("predicted %zu rows -> %s\n", rows.size(),
                args.out_path.c_str());
  return kExitOk;
}

nlohmann::json config_echo(const std::string& config_path) {
  std::ifstream in(config_path);
  nlohmann::json j;
  in >> j;
  return j;
}

int cmd_bench(const std::string& config_path, flynn::ExperimentConfig config,
              const std::string& cache_dir, bool dry_run) {
  flynn::ResultsWriter writer;
  const auto summary = flynn::run_bench(config, writer, cache_dir, dry_run);
  writer.write(config.output, config.zero_timings);
  flynn::write_manifest(config.output + ".manifest.json",
                        config_echo(config_path),
                        "bench-" + std::to_string(config.seed));
  if (dry_run) {
    std::printf("dry run: %zu result row(s) -> %s\n", writer.rows().size(),
                config.output.c_str());
    return kExitOk;
  }
  std::printf("datasets: %zu\n", summary.per_dataset.size());
  std::printf("normalized accuracy (mean +/- se; negative beats kNN):\n");
  std::printf("  flynn %+.4f +/- %.4f\n", summary.flynn_norm_mean,
              summary.flynn_norm_se);
  std::printf("  1nn   %+.4f +/- %.4f\n", summary.nn1_norm_mean,
              summary.nn1_norm_se);
  std::printf("  sbfc  %+.4f +/- %.4f\n", summary.sbfc_norm_mean,
              summary.sbfc_norm_se);
  std::printf("results -> %s\n", config.output.c_str());
  return kExitOk;
}

int cmd_scale(const std::string& config_path, flynn::ExperimentConfig config,
              const std::string& cache_dir) {
  const unsigned cores = flynn::default_thread_count();
  const std::uint32_t max_tau =
      *std::max_element(config.tau.begin(), config.tau.end());
  if (cores < max_tau)
    std::fprintf(stderr,
                 "warning: host has %u hardware threads but the plan asks "
                 "for %u parties; speedups will not be meaningful\n",
                 cores, max_tau);
  flynn::ResultsWriter writer;
  const auto summary = flynn::run_scale(config, writer, cache_dir);
  writer.write(config.output, config.zero_timings);
  flynn::write_manifest(config.output + ".manifest.json",
                        config_echo(config_path),
                        "scale-" + std::to_string(config.seed));
  std::printf("tau  wall_s(mean+/-sd)  speedup\n");
  for (std::size_t i = 0; i < summary.tau.size(); ++i)
    std::printf("%3u  %8.3f+/-%.3f  %6.2fx\n", summary.tau[i],
                summary.mean_wall_seconds[i], summary.sd_wall_seconds[i],
                summary.speedup[i]);
  std::printf("results -> %s\n", config.output.c_str());
  return kExitOk;
}

int cmd_dp_sweep(const std::string& config_path,
                 flynn::ExperimentConfig config,
                 const std::string& cache_dir) {
  flynn::ResultsWriter writer;
  const auto summary = flynn::run_dp_sweep(config, writer, cache_dir);
  writer.write(config.output, config.zero_timings);
  flynn::write_manifest(config.output + ".manifest.json",
                        config_echo(config_path),
                        "dp-" + std::to_string(config.seed));
  std::printf("non-private baseline accuracy: %.4f\n",
              summary.baseline_accuracy);
  std::printf("%8s", "eps\\T");
  for (const auto t : config.dp_samples) std::printf("%9u", t);
  std::printf("\n");
  const std::size_t t_count = config.dp_samples.size();
  for (std::size_t ei = 0; ei < config.dp_epsilons.size(); ++ei) {
    std::printf("%8.2f", config.dp_epsilons[ei]);
    for (std::size_t ti = 0; ti < t_count; ++ti)
      std::printf("%9.4f", summary.cell(ei, ti, t_count).mean_accuracy);
    std::printf("  | best %.4f\n", summary.best_accuracy_per_epsilon[ei]);
  }
  std::printf("results -> %s\n", config.output.c_str());
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Fly Bloom Filter nearest-neighbor classifier toolkit"};
  app.require_subcommand(1);

  TrainArgs train_args;
  auto* train = app.add_subcommand("train", "train a model from a CSV");
  train->add_option("--data", train_args.data_path, "numeric CSV")->required();
  train->add_option("--label-column", train_args.label_column,
                    "label column index");
  train->add_flag("--header", train_args.has_header, "CSV has a header row");
  train->add_option("--model", train_args.model_path, "output model path")
      ->required();
  train->add_option("--m", train_args.m, "lifted dimension");
  train->add_option("--s", train_args.s, "nonzeros per lifting row");
  train->add_option("--rho", train_args.rho, "nonzeros in the hash");
  train->add_option("--gamma", train_args.gamma, "decay rate in [0,1)");
  train->add_option("--seed", train_args.seed, "hash seed");
  train->add_option("--hash", train_args.hash, "fly or sim")
      ->check(CLI::IsMember({"fly", "sim"}));

  InferArgs infer_args;
  auto* infer = app.add_subcommand("infer", "batch predictions from a model");
  infer->add_option("--model", infer_args.model_path, "model file")->required();
  infer->add_option("--data", infer_args.data_path, "numeric CSV")->required();
  infer->add_option("--label-column", infer_args.label_column,
                    "label column index (ignored with --no-labels)");
  infer->add_flag("--header", infer_args.has_header, "CSV has a header row");
  infer->add_flag("--no-labels", infer_args.no_labels,
                  "input has features only");
  infer->add_option("--out", infer_args.out_path, "predictions CSV")
      ->required();

  std::string config_path;
  std::string cache_dir = default_cache_dir();
  std::string output_override;
  std::uint64_t seed_override = 0;
  bool has_seed_override = false;
  unsigned threads_override = 0;
  bool zero_timings = false;
  bool dry_run = false;

  const auto add_experiment_options = [&](CLI::App* cmd) {
    cmd->add_option("--config", config_path, "experiment config (JSON)")
        ->required();
    cmd->add_option("--output", output_override, "results CSV path");
    cmd->add_option("--seed", seed_override, "root seed override")
        ->each([&](const std::string&) { has_seed_override = true; });
    cmd->add_option("--threads", threads_override, "worker threads");
    cmd->add_flag("--zero-timings", zero_timings,
                  "write 0 in wall-time columns (reproducible bytes)");
    cmd->add_option("--cache-dir", cache_dir, "dataset cache directory");
  };

  auto* bench = app.add_subcommand("bench", "classifier benchmark suite");
  add_experiment_options(bench);
  bench->add_flag("--dry-run", dry_run, "single config, single fold");

  auto* scale = app.add_subcommand("scale", "federated scaling measurement");
  add_experiment_options(scale);

  auto* dp = app.add_subcommand("dp-sweep", "privacy/utility grid");
  add_experiment_options(dp);

  std::string fetch_url;
  auto* fetch = app.add_subcommand("fetch", "download a dataset into the cache");
  fetch->add_option("--url", fetch_url, "http(s) URL")->required();
  fetch->add_option("--cache-dir", cache_dir, "dataset cache directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (train->parsed()) return cmd_train(train_args);
    if (infer->parsed()) return cmd_infer(infer_args);
    if (fetch->parsed()) {
      const std::string path = flynn::fetch_dataset(fetch_url, cache_dir);
      std::printf("%s\n", path.c_str());
      return kExitOk;
    }
    flynn::ExperimentConfig config = flynn::load_config(config_path);
    if (!output_override.empty()) config.output = output_override;
    if (has_seed_override) config.seed = seed_override;
    if (threads_override) config.threads = threads_override;
    if (zero_timings) config.zero_timings = true;
    if (bench->parsed()) return cmd_bench(config_path, config, cache_dir, dry_run);
    if (scale->parsed()) return cmd_scale(config_path, config, cache_dir);
    if (dp->parsed()) return cmd_dp_sweep(config_path, config, cache_dir);
    std::fprintf(stderr, "no subcommand\n");
    return kExitConfig;
  } catch (const flynn::ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kExitConfig;
  } catch (const flynn::DataError& e) {
    std::fprintf(stderr, "data error: %s\n", e.what());
    return kExitData;
  } catch (const flynn::TransportError& e) {
    std::fprintf(stderr, "transport error: %s\n", e.what());
    return kExitTransport;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "internal error: %s\n", e.what());
    return kExitInternal;
  }
}

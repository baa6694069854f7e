#pragma once

#include <cstdint>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "flynn/error.hpp"
#include "flynn/synth.hpp"

namespace flynn {

enum class ExperimentKind { kBench, kScale, kDpSweep };

struct DatasetSource {
  enum class Kind { kSynth, kCsv, kUrl } kind = Kind::kSynth;
  SynthSpec synth;
  std::string path;          // csv
  std::string url;           // url (fetched into cache, then read as csv)
  std::uint32_t label_column = 0;
  bool has_header = false;
  bool minmax = false;
};

// Grid bounds for the hyper-parameter search. m scales with the data
// dimension; the grid itself is sampled log-uniformly (gamma uniformly, with
// a zero floor) from these ranges with a sub-seed of the root seed.
struct GridRanges {
  std::uint32_t m_min_factor = 2;
  std::uint32_t m_max_factor = 2048;
  std::uint32_t s_min = 2;
  double s_max_fraction = 0.5;
  std::uint32_t rho_min = 8;
  std::uint32_t rho_max = 256;
  double gamma_min = 0.0;
  double gamma_max = 0.8;
};

struct ExperimentConfig {
  ExperimentKind kind = ExperimentKind::kBench;
  DatasetSource dataset;

  // bench
  std::uint32_t dataset_seeds = 30;
  std::uint32_t grid_points = 60;
  GridRanges grid;
  std::vector<std::uint32_t> knn_k = {1, 2, 4, 8, 16, 32, 64};
  std::vector<std::uint32_t> sbfc_m = {16, 64, 256, 1024, 4096};
  std::uint32_t folds = 10;

  // scale
  std::vector<std::uint32_t> tau = {1, 2, 4};
  std::uint32_t repetitions = 10;
  std::uint32_t scale_m = 0;  // 0 = 16 * d
  std::uint32_t scale_s = 0;  // 0 = max(2, d / 40)
  std::uint32_t scale_rho = 16;
  std::string scale_gamma = "0.5";

  // dp sweep
  std::vector<double> dp_epsilons = {0.25, 0.5, 1.0, 2.0};
  std::vector<std::uint32_t> dp_samples = {4, 15, 60, 150, 300, 600};
  std::uint32_t dp_tau = 2;
  std::uint32_t dp_m = 300;
  std::uint32_t dp_s = 3;
  std::uint32_t dp_rho = 15;
  std::string dp_gamma = "0.9";
  std::size_t dp_test_n = 1000;

  std::uint64_t seed = 42;
  unsigned threads = 0;  // 0 = hardware concurrency
  std::string output = "results.csv";
  bool zero_timings = false;

  void validate() const {
    if (grid_points < 1) throw ConfigError("config: grid_points must be >= 1");
    if (folds < 2) throw ConfigError("config: folds must be >= 2");
    if (dataset_seeds < 1)
      throw ConfigError("config: dataset_seeds must be >= 1");
    if (repetitions < 1) throw ConfigError("config: repetitions must be >= 1");
    if (knn_k.empty()) throw ConfigError("config: knn_k must be nonempty");
    if (kind == ExperimentKind::kScale && tau.empty())
      throw ConfigError("config: tau list must be nonempty");
    if (kind == ExperimentKind::kDpSweep) {
      if (dp_epsilons.empty() || dp_samples.empty())
        throw ConfigError("config: dp grids must be nonempty");
      if (dp_tau < 2)
        throw ConfigError("config: dp sweep needs tau >= 2");
    }
  }
};

namespace detail {

template <typename T>
T field_or(const nlohmann::json& j, const char* key, T fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("config: bad value for '") + key +
                      "': " + e.what());
  }
}

inline DatasetSource parse_dataset(const nlohmann::json& j) {
  DatasetSource src;
  const std::string kind = field_or<std::string>(j, "kind", "synth");
  if (kind == "synth") {
    src.kind = DatasetSource::Kind::kSynth;
    src.synth.n = field_or<std::size_t>(j, "n", src.synth.n);
    src.synth.d = field_or<std::uint32_t>(j, "d", src.synth.d);
    src.synth.classes = field_or<std::uint32_t>(j, "classes", src.synth.classes);
    src.synth.clusters_per_class =
        field_or<std::uint32_t>(j, "clusters_per_class",
                                src.synth.clusters_per_class);
    src.synth.class_sep = field_or<double>(j, "class_sep", src.synth.class_sep);
    src.synth.informative =
        field_or<std::uint32_t>(j, "informative", src.synth.informative);
    src.synth.binarize_b =
        field_or<std::uint32_t>(j, "binarize_b", src.synth.binarize_b);
  } else if (kind == "csv") {
    src.kind = DatasetSource::Kind::kCsv;
    if (!j.contains("path")) throw ConfigError("config: csv dataset needs 'path'");
    src.path = j.at("path").get<std::string>();
    src.label_column = field_or<std::uint32_t>(j, "label_column", 0);
    src.has_header = field_or<bool>(j, "has_header", false);
  } else if (kind == "url") {
    src.kind = DatasetSource::Kind::kUrl;
    if (!j.contains("url")) throw ConfigError("config: url dataset needs 'url'");
    src.url = j.at("url").get<std::string>();
    src.label_column = field_or<std::uint32_t>(j, "label_column", 0);
    src.has_header = field_or<bool>(j, "has_header", false);
  } else {
    throw ConfigError("config: unknown dataset kind '" + kind + "'");
  }
  src.minmax = field_or<bool>(j, "minmax", false);
  return src;
}

}  // namespace detail

inline ExperimentConfig parse_config(const nlohmann::json& j) {
  ExperimentConfig config;
  const std::string kind = detail::field_or<std::string>(j, "experiment", "bench");
  if (kind == "bench")
    config.kind = ExperimentKind::kBench;
  else if (kind == "scale")
    config.kind = ExperimentKind::kScale;
  else if (kind == "dp_sweep" || kind == "dp-sweep")
    config.kind = ExperimentKind::kDpSweep;
  else
    throw ConfigError("config: unknown experiment '" + kind + "'");

  if (j.contains("dataset")) config.dataset = detail::parse_dataset(j.at("dataset"));
  config.dataset_seeds =
      detail::field_or<std::uint32_t>(j, "dataset_seeds", config.dataset_seeds);
  config.grid_points =
      detail::field_or<std::uint32_t>(j, "grid_points", config.grid_points);
  if (j.contains("grid")) {
    const auto& g = j.at("grid");
    config.grid.m_min_factor = detail::field_or<std::uint32_t>(
        g, "m_min_factor", config.grid.m_min_factor);
    config.grid.m_max_factor = detail::field_or<std::uint32_t>(
        g, "m_max_factor", config.grid.m_max_factor);
    config.grid.s_min =
        detail::field_or<std::uint32_t>(g, "s_min", config.grid.s_min);
    config.grid.s_max_fraction = detail::field_or<double>(
        g, "s_max_fraction", config.grid.s_max_fraction);
    config.grid.rho_min =
        detail::field_or<std::uint32_t>(g, "rho_min", config.grid.rho_min);
    config.grid.rho_max =
        detail::field_or<std::uint32_t>(g, "rho_max", config.grid.rho_max);
    config.grid.gamma_min =
        detail::field_or<double>(g, "gamma_min", config.grid.gamma_min);
    config.grid.gamma_max =
        detail::field_or<double>(g, "gamma_max", config.grid.gamma_max);
  }
  config.knn_k = detail::field_or(j, "knn_k", config.knn_k);
  config.sbfc_m = detail::field_or(j, "sbfc_m", config.sbfc_m);
  config.folds = detail::field_or<std::uint32_t>(j, "folds", config.folds);
  config.tau = detail::field_or(j, "tau", config.tau);
  config.repetitions =
      detail::field_or<std::uint32_t>(j, "repetitions", config.repetitions);
  config.scale_m = detail::field_or<std::uint32_t>(j, "scale_m", config.scale_m);
  config.scale_s = detail::field_or<std::uint32_t>(j, "scale_s", config.scale_s);
  config.scale_rho =
      detail::field_or<std::uint32_t>(j, "scale_rho", config.scale_rho);
  config.scale_gamma =
      detail::field_or<std::string>(j, "scale_gamma", config.scale_gamma);
  if (j.contains("dp")) {
    const auto& dp = j.at("dp");
    config.dp_epsilons = detail::field_or(dp, "epsilons", config.dp_epsilons);
    config.dp_samples = detail::field_or(dp, "samples", config.dp_samples);
    config.dp_tau = detail::field_or<std::uint32_t>(dp, "tau", config.dp_tau);
    config.dp_m = detail::field_or<std::uint32_t>(dp, "m", config.dp_m);
    config.dp_s = detail::field_or<std::uint32_t>(dp, "s", config.dp_s);
    config.dp_rho = detail::field_or<std::uint32_t>(dp, "rho", config.dp_rho);
    config.dp_gamma =
        detail::field_or<std::string>(dp, "gamma", config.dp_gamma);
    config.dp_test_n =
        detail::field_or<std::size_t>(dp, "test_n", config.dp_test_n);
    config.repetitions =
        detail::field_or<std::uint32_t>(dp, "repetitions", config.repetitions);
  }
  config.seed = detail::field_or<std::uint64_t>(j, "seed", config.seed);
  config.threads = detail::field_or<unsigned>(j, "threads", config.threads);
  config.output = detail::field_or<std::string>(j, "output", config.output);
  config.zero_timings =
      detail::field_or<bool>(j, "zero_timings", config.zero_timings);
  config.validate();
  return config;
}

inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot open '" + path + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("config: parse error in '" + path + "': " + e.what());
  }
  return parse_config(j);
}

}  // namespace flynn

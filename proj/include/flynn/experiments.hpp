#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

#include "flynn/classifier.hpp"
#include "flynn/config.hpp"
#include "flynn/csv.hpp"
#include "flynn/dataset.hpp"
#include "flynn/federated.hpp"
#include "flynn/fetch.hpp"
#include "flynn/knn.hpp"
#include "flynn/parallel.hpp"
#include "flynn/results.hpp"
#include "flynn/rng.hpp"
#include "flynn/synth.hpp"

namespace flynn {

struct FlyParams {
  std::uint32_t m = 0;
  std::uint32_t s = 0;
  std::uint32_t rho = 0;
  std::string gamma_text = "0";

  std::string describe() const {
    return "m=" + std::to_string(m) + ";s=" + std::to_string(s) +
           ";rho=" + std::to_string(rho) + ";gamma=" + gamma_text;
  }
};

// Log-uniform hyper-parameter sample over the configured ranges (gamma is
// uniform with an explicit zero floor so the binary-filter regime shows up).
// Sampling uses a sub-seed of the root seed only, so the grid is identical
// for every dataset of a run.
inline std::vector<FlyParams> sample_grid(std::uint32_t d,
                                          const ExperimentConfig& config) {
  const auto& ranges = config.grid;
  Rng rng = Rng(config.seed).substream(rng_tag::kGrid);
  const auto log_uniform = [&rng](double lo, double hi) {
    if (hi <= lo) return lo;
    return lo * std::exp(rng.next_double() * std::log(hi / lo));
  };

  const double m_lo = static_cast<double>(ranges.m_min_factor) * d;
  const double m_hi = static_cast<double>(ranges.m_max_factor) * d;
  const double s_lo = ranges.s_min;
  const double s_hi =
      std::max<double>(ranges.s_min, ranges.s_max_fraction * d);

  std::vector<FlyParams> grid;
  grid.reserve(config.grid_points);
  for (std::uint32_t g = 0; g < config.grid_points; ++g) {
    FlyParams p;
    p.m = static_cast<std::uint32_t>(std::lround(log_uniform(m_lo, m_hi)));
    p.s = std::min<std::uint32_t>(
        d, static_cast<std::uint32_t>(std::lround(log_uniform(s_lo, s_hi))));
    const double rho_hi = std::min<double>(ranges.rho_max, p.m);
    p.rho = static_cast<std::uint32_t>(
        std::lround(log_uniform(ranges.rho_min, rho_hi)));
    p.rho = std::min(p.rho, p.m);
    const double gamma =
        ranges.gamma_min +
        rng.next_double() * (ranges.gamma_max - ranges.gamma_min);
    // snap the low end to exactly zero so gamma = 0 is actually explored
    p.gamma_text = gamma < 0.05 ? "0" : format_double(gamma);
    grid.push_back(std::move(p));
  }
  return grid;
}

inline Dataset load_dataset_source(const DatasetSource& source,
                                   std::uint64_t synth_seed,
                                   const std::string& cache_dir) {
  Dataset data;
  switch (source.kind) {
    case DatasetSource::Kind::kSynth: {
      SynthSpec spec = source.synth;
      spec.seed = synth_seed;
      data = make_classification(spec);
      break;
    }
    case DatasetSource::Kind::kCsv:
      data = load_csv(source.path, source.label_column, source.has_header);
      break;
    case DatasetSource::Kind::kUrl: {
      const std::string path = fetch_dataset(source.url, cache_dir);
      data = load_csv(path, source.label_column, source.has_header);
      break;
    }
  }
  if (source.minmax) data = minmax_scale(data);
  return data;
}

namespace detail {

// Cross-validated accuracy of the count-based classifier given precomputed
// hashes; hashes do not depend on the fold split, so they are shared.
inline std::pair<double, std::vector<double>> cv_accuracy_from_hashes(
    const std::vector<SparseBitVector>& hashes,
    const std::vector<std::uint32_t>& labels, std::uint32_t num_classes,
    std::uint32_t bits, const std::vector<TrainTestSplit>& folds,
    double gamma) {
  DecayTable decay(gamma);
  std::vector<double> fold_accuracies;
  fold_accuracies.reserve(folds.size());
  for (const auto& fold : folds) {
    ClassCounts counts(num_classes, bits);
    for (std::uint32_t i : fold.train_indices)
      counts.record(labels[i], hashes[i]);
    std::size_t correct = 0;
    for (std::uint32_t i : fold.test_indices) {
      std::uint32_t best = 0;
      double best_score = std::numeric_limits<double>::infinity();
      for (std::uint32_t l = 0; l < num_classes; ++l) {
        double score = 0.0;
        for (std::uint32_t b : hashes[i].ones) score += decay(counts.at(l, b));
        if (score < best_score) {
          best_score = score;
          best = l;
        }
      }
      correct += best == labels[i];
    }
    fold_accuracies.push_back(static_cast<double>(correct) /
                              static_cast<double>(fold.test_indices.size()));
  }
  return {mean_of(fold_accuracies), fold_accuracies};
}

// Per-fold kNN accuracy for every k in one pass per test point.
inline std::vector<std::vector<double>> knn_cv_accuracies(
    const Dataset& data, const std::vector<TrainTestSplit>& folds,
    const std::vector<std::uint32_t>& k_grid) {
  std::vector<std::vector<double>> acc(k_grid.size());
  for (auto& a : acc) a.reserve(folds.size());
  const std::uint32_t num_classes = data.num_classes();

  for (const auto& fold : folds) {
    std::vector<std::size_t> correct(k_grid.size(), 0);
    std::vector<std::pair<double, std::uint32_t>> order(
        fold.train_indices.size());
    std::vector<std::uint32_t> votes(num_classes);
    for (std::uint32_t i : fold.test_indices) {
      const auto x = data.row(i);
      for (std::size_t t = 0; t < fold.train_indices.size(); ++t) {
        const std::uint32_t j = fold.train_indices[t];
        order[t] = {-similarity(x, data.row(j),
                                SimilarityKind::kNegativeEuclidean),
                    static_cast<std::uint32_t>(t)};
      }
      std::sort(order.begin(), order.end());
      std::fill(votes.begin(), votes.end(), 0u);
      std::uint32_t leader = 0;
      std::size_t next_k = 0;
      for (std::size_t rank = 0;
           rank < order.size() && next_k < k_grid.size(); ++rank) {
        const std::uint32_t label =
            data.label(fold.train_indices[order[rank].second]);
        ++votes[label];
        if (votes[label] > votes[leader] ||
            (votes[label] == votes[leader] && label < leader))
          leader = label;
        while (next_k < k_grid.size() && rank + 1 == k_grid[next_k]) {
          correct[next_k] += leader == data.label(i);
          ++next_k;
        }
      }
    }
    for (std::size_t ki = 0; ki < k_grid.size(); ++ki)
      acc[ki].push_back(static_cast<double>(correct[ki]) /
                        static_cast<double>(fold.test_indices.size()));
  }
  return acc;
}

}  // namespace detail

struct BenchDatasetResult {
  std::uint64_t dataset_seed = 0;
  double knn_accuracy = 0.0;
  std::string knn_params;
  double nn1_accuracy = 0.0;
  double flynn_accuracy = 0.0;
  std::string flynn_params;
  double sbfc_accuracy = 0.0;
  std::string sbfc_params;
};

struct BenchSummary {
  std::vector<BenchDatasetResult> per_dataset;
  double flynn_norm_mean = 0.0, flynn_norm_se = 0.0;
  double sbfc_norm_mean = 0.0, sbfc_norm_se = 0.0;
  double nn1_norm_mean = 0.0, nn1_norm_se = 0.0;
};

// Benchmark: tuned kNN / 1NN / tuned FlyNN / tuned SBFC under shared
// 10-fold splits, aggregated as normalized accuracy over dataset seeds.
inline BenchSummary run_bench(const ExperimentConfig& config,
                              ResultsWriter& writer,
                              const std::string& cache_dir = ".flynn-cache",
                              bool dry_run = false) {
  const std::string experiment_id =
      "bench-" + std::to_string(config.seed);
  const std::uint32_t num_datasets =
      config.dataset.kind == DatasetSource::Kind::kSynth && !dry_run
          ? config.dataset_seeds
          : 1;

  struct TaskRows {
    std::vector<ResultRecord> rows;
  };

  BenchSummary summary;
  summary.per_dataset.resize(num_datasets);

  std::vector<Dataset> datasets(num_datasets);
  for (std::uint32_t di = 0; di < num_datasets; ++di)
    datasets[di] = load_dataset_source(config.dataset, config.seed + di,
                                       cache_dir);
  const std::uint32_t dim = datasets.front().dim();
  std::vector<FlyParams> grid = sample_grid(dim, config);
  if (dry_run) grid.resize(1);

  const std::uint32_t folds_per_dataset =
      dry_run ? 2 : config.folds;

  // task layout per dataset: [0] knn, [1..G] grid points, [G+1 ..] sbfc
  const std::size_t sbfc_count = dry_run ? 0 : config.sbfc_m.size();
  const std::size_t per_dataset = 1 + grid.size() + sbfc_count;
  const std::size_t task_count = per_dataset * num_datasets;

  struct TaskOutput {
    std::vector<ResultRecord> rows;
    double mean_accuracy = 0.0;
    std::string params;
  };
  std::vector<TaskOutput> outputs(task_count);

  const unsigned threads =
      config.threads ? config.threads : default_thread_count();

  parallel_for(task_count, threads, [&](std::size_t task) {
    const std::uint32_t di = static_cast<std::uint32_t>(task / per_dataset);
    const std::size_t slot = task % per_dataset;
    const Dataset& data = datasets[di];
    const std::uint64_t dataset_seed = config.seed + di;
    const auto folds = kfold(data, folds_per_dataset, dataset_seed);
    auto& out = outputs[task];

    if (slot == 0) {
      if (dry_run) return;  // dry run: single flynn record only
      const auto accs = detail::knn_cv_accuracies(data, folds, config.knn_k);
      for (std::size_t ki = 0; ki < config.knn_k.size(); ++ki) {
        const std::string params = "k=" + std::to_string(config.knn_k[ki]);
        for (std::size_t f = 0; f < accs[ki].size(); ++f)
          out.rows.push_back({experiment_id, "knn", params,
                              static_cast<int>(f), static_cast<int>(di),
                              accs[ki][f], std::nan(""), 0.0, 0, 0,
                              dataset_seed});
      }
      // best k by mean accuracy; pack into params/mean for the collector
      double best = -1.0;
      std::string best_params;
      double nn1 = 0.0;
      for (std::size_t ki = 0; ki < config.knn_k.size(); ++ki) {
        const double mean = mean_of(accs[ki]);
        if (config.knn_k[ki] == 1) nn1 = mean;
        if (mean > best) {
          best = mean;
          best_params = "k=" + std::to_string(config.knn_k[ki]);
        }
      }
      out.mean_accuracy = best;
      out.params = best_params + "|nn1=" + format_double(nn1);
      return;
    }

    if (slot <= grid.size()) {
      const auto& p = grid[slot - 1];
      const std::uint64_t hash_seed =
          Rng(dataset_seed).substream_seed(1000 + slot);
      const auto start = std::chrono::steady_clock::now();
      const FlyHasher hasher(hash_seed, p.m, dim, p.s, p.rho);
      std::vector<SparseBitVector> hashes;
      hashes.reserve(data.size());
      for (std::size_t i = 0; i < data.size(); ++i)
        hashes.push_back(hasher(data.row(i)));
      const auto [mean, fold_accs] = detail::cv_accuracy_from_hashes(
          hashes, data.labels(), data.num_classes(), p.m, folds,
          FlyNnModel::parse_gamma(p.gamma_text));
      const double ms = std::chrono::duration<double, std::milli>(
                            std::chrono::steady_clock::now() - start)
                            .count();
      for (std::size_t f = 0; f < fold_accs.size(); ++f) {
        out.rows.push_back({experiment_id, "flynn", p.describe(),
                            static_cast<int>(f), static_cast<int>(di),
                            fold_accs[f], std::nan(""),
                            ms / fold_accs.size(), 0, 0, hash_seed});
        if (dry_run) break;  // exactly one record
      }
      out.mean_accuracy = mean;
      out.params = p.describe();
      return;
    }

    const std::size_t mi = slot - grid.size() - 1;
    const std::uint32_t m = config.sbfc_m[mi];
    const std::uint64_t hash_seed =
        Rng(dataset_seed).substream_seed(2000 + mi);
    const SimHasher hasher(hash_seed, m, dim);
    std::vector<SparseBitVector> hashes;
    hashes.reserve(data.size());
    for (std::size_t i = 0; i < data.size(); ++i)
      hashes.push_back(hasher(data.row(i)));
    const auto [mean, fold_accs] = detail::cv_accuracy_from_hashes(
        hashes, data.labels(), data.num_classes(), m, folds, 0.0);
    const std::string params = "m=" + std::to_string(m);
    for (std::size_t f = 0; f < fold_accs.size(); ++f)
      out.rows.push_back({experiment_id, "sbfc", params, static_cast<int>(f),
                          static_cast<int>(di), fold_accs[f], std::nan(""),
                          0.0, 0, 0, hash_seed});
    out.mean_accuracy = mean;
    out.params = params;
  });

  // Collect in task order (deterministic), then the per-dataset winners.
  std::vector<double> flynn_norms, sbfc_norms, nn1_norms;
  for (std::uint32_t di = 0; di < num_datasets; ++di) {
    auto& result = summary.per_dataset[di];
    result.dataset_seed = config.seed + di;
    const std::size_t base = static_cast<std::size_t>(di) * per_dataset;

    if (!dry_run) {
      const auto& knn_out = outputs[base];
      result.knn_accuracy = knn_out.mean_accuracy;
      const auto bar = knn_out.params.find("|nn1=");
      result.knn_params = knn_out.params.substr(0, bar);
      result.nn1_accuracy =
          std::stod(knn_out.params.substr(bar + 5));
    }
    for (std::size_t g = 0; g < grid.size(); ++g) {
      const auto& out = outputs[base + 1 + g];
      if (out.mean_accuracy > result.flynn_accuracy) {
        result.flynn_accuracy = out.mean_accuracy;
        result.flynn_params = out.params;
      }
    }
    for (std::size_t mi = 0; mi < sbfc_count; ++mi) {
      const auto& out = outputs[base + 1 + grid.size() + mi];
      if (out.mean_accuracy > result.sbfc_accuracy) {
        result.sbfc_accuracy = out.mean_accuracy;
        result.sbfc_params = out.params;
      }
    }
    if (!dry_run) {
      flynn_norms.push_back(
          normalized_accuracy(result.flynn_accuracy, result.knn_accuracy));
      sbfc_norms.push_back(
          normalized_accuracy(result.sbfc_accuracy, result.knn_accuracy));
      nn1_norms.push_back(
          normalized_accuracy(result.nn1_accuracy, result.knn_accuracy));
    }
  }
  for (auto& out : outputs)
    for (auto& row : out.rows) writer.add(std::move(row));

  // Per-dataset normalized-accuracy summary rows.
  for (std::uint32_t di = 0; di < num_datasets && !dry_run; ++di) {
    const auto& r = summary.per_dataset[di];
    const auto add_summary = [&](const std::string& method,
                                 const std::string& params, double acc) {
      writer.add({experiment_id, method + "-best", params, -1,
                  static_cast<int>(di), acc,
                  normalized_accuracy(acc, r.knn_accuracy), 0.0, 0, 0,
                  r.dataset_seed});
    };
    add_summary("knn", r.knn_params, r.knn_accuracy);
    add_summary("1nn", "k=1", r.nn1_accuracy);
    add_summary("flynn", r.flynn_params, r.flynn_accuracy);
    add_summary("sbfc", r.sbfc_params, r.sbfc_accuracy);
  }

  summary.flynn_norm_mean = mean_of(flynn_norms);
  summary.flynn_norm_se = std_error_of(flynn_norms);
  summary.sbfc_norm_mean = mean_of(sbfc_norms);
  summary.sbfc_norm_se = std_error_of(sbfc_norms);
  summary.nn1_norm_mean = mean_of(nn1_norms);
  summary.nn1_norm_se = std_error_of(nn1_norms);
  return summary;
}

struct ScaleSummary {
  std::vector<std::uint32_t> tau;
  std::vector<double> mean_wall_seconds;
  std::vector<double> sd_wall_seconds;
  std::vector<double> speedup;  // vs tau = 1
  bool host_too_small = false;
  unsigned hardware_threads = 0;
};

// Wall time of one-round federated training as the party count grows; the
// dataset is fixed and the shards are even round-robin splits.
inline ScaleSummary run_scale(const ExperimentConfig& config,
                              ResultsWriter& writer,
                              const std::string& cache_dir = ".flynn-cache") {
  const std::string experiment_id = "scale-" + std::to_string(config.seed);
  const Dataset data =
      load_dataset_source(config.dataset, config.seed, cache_dir);
  const std::uint32_t d = data.dim();
  const std::uint32_t m = config.scale_m ? config.scale_m : 16 * d;
  const std::uint32_t s =
      config.scale_s ? config.scale_s : std::max<std::uint32_t>(2, d / 40);
  const std::uint32_t rho = config.scale_rho;

  ScaleSummary summary;
  summary.hardware_threads = default_thread_count();
  const std::uint32_t max_tau =
      *std::max_element(config.tau.begin(), config.tau.end());
  summary.host_too_small = summary.hardware_threads < max_tau;

  const std::string params = "m=" + std::to_string(m) + ";s=" +
                             std::to_string(s) + ";rho=" +
                             std::to_string(rho) + ";gamma=" +
                             config.scale_gamma;

  for (const std::uint32_t tau : config.tau) {
    std::vector<double> walls;
    for (std::uint32_t rep = 0; rep < config.repetitions; ++rep) {
      FederationPlan plan;
      plan.shards = shard(data, tau, ShardPolicy::kRoundRobin);
      plan.m = m;
      plan.s = s;
      plan.rho = rho;
      plan.gamma_text = config.scale_gamma;
      plan.root_seed = config.seed + rep;
      plan.timeout = std::chrono::minutes(10);
      const auto result = train_flynn_fl(plan);
      walls.push_back(result.wall_seconds);
      writer.add({experiment_id, "flynn_fl",
                  params + ";tau=" + std::to_string(tau), -1,
                  static_cast<int>(rep), std::nan(""), std::nan(""),
                  result.wall_seconds * 1000.0, result.total_bytes_sent(),
                  result.total_bytes_received(), plan.root_seed});
    }
    summary.tau.push_back(tau);
    summary.mean_wall_seconds.push_back(mean_of(walls));
    summary.sd_wall_seconds.push_back(
        std_error_of(walls) * std::sqrt(static_cast<double>(walls.size())));
  }
  for (std::size_t i = 0; i < summary.tau.size(); ++i)
    summary.speedup.push_back(summary.mean_wall_seconds.front() /
                              summary.mean_wall_seconds[i]);
  return summary;
}

struct DpSweepCell {
  double epsilon = 0.0;
  std::uint32_t samples = 0;
  double mean_accuracy = 0.0;
  double std_error = 0.0;
};

struct DpSweepSummary {
  double baseline_accuracy = 0.0;  // non-private federated run
  std::vector<DpSweepCell> cells;
  // best-T accuracy per epsilon, epsilon order matches config.dp_epsilons
  std::vector<double> best_accuracy_per_epsilon;

  const DpSweepCell& cell(std::size_t eps_index, std::size_t t_index,
                          std::size_t t_count) const {
    return cells[eps_index * t_count + t_index];
  }
};

inline double test_accuracy(const FlyNnModel& model, const Dataset& test) {
  std::size_t correct = 0;
  for (std::size_t i = 0; i < test.size(); ++i)
    correct += infer(model, test.row(i)).label_index == test.label(i);
  return static_cast<double>(correct) / static_cast<double>(test.size());
}

// Privacy/utility grid over (epsilon, T) against the non-private baseline,
// all through the same federated runtime.
inline DpSweepSummary run_dp_sweep(const ExperimentConfig& config,
                                   ResultsWriter& writer,
                                   const std::string& cache_dir =
                                       ".flynn-cache") {
  const std::string experiment_id = "dp-" + std::to_string(config.seed);
  const Dataset train_data =
      load_dataset_source(config.dataset, config.seed, cache_dir);
  DatasetSource test_source = config.dataset;
  if (test_source.kind == DatasetSource::Kind::kSynth)
    test_source.synth.n = config.dp_test_n;
  const Dataset test_data =
      load_dataset_source(test_source, config.seed + 777, cache_dir);

  const auto base_plan = [&](std::uint32_t rep) {
    FederationPlan plan;
    plan.shards = shard(train_data, config.dp_tau, ShardPolicy::kRoundRobin);
    plan.m = config.dp_m;
    plan.s = config.dp_s;
    plan.rho = config.dp_rho;
    plan.gamma_text = config.dp_gamma;
    plan.root_seed = config.seed + rep;
    plan.timeout = std::chrono::minutes(10);
    return plan;
  };
  const std::string base_params =
      "m=" + std::to_string(config.dp_m) + ";s=" + std::to_string(config.dp_s) +
      ";rho=" + std::to_string(config.dp_rho) + ";gamma=" + config.dp_gamma +
      ";tau=" + std::to_string(config.dp_tau);

  DpSweepSummary summary;
  {
    std::vector<double> accs;
    for (std::uint32_t rep = 0; rep < config.repetitions; ++rep) {
      const auto plan = base_plan(rep);
      const auto result = train_flynn_fl(plan);
      const double acc = test_accuracy(result.models.front(), test_data);
      accs.push_back(acc);
      writer.add({experiment_id, "flynn_fl", base_params, -1,
                  static_cast<int>(rep), acc, std::nan(""),
                  result.wall_seconds * 1000.0, result.total_bytes_sent(),
                  result.total_bytes_received(), plan.root_seed});
    }
    summary.baseline_accuracy = mean_of(accs);
  }

  for (std::size_t ei = 0; ei < config.dp_epsilons.size(); ++ei) {
    const double epsilon = config.dp_epsilons[ei];
    double best = 0.0;
    for (const std::uint32_t samples : config.dp_samples) {
      std::vector<double> accs;
      for (std::uint32_t rep = 0; rep < config.repetitions; ++rep) {
        auto plan = base_plan(rep);
        plan.is_dp = true;
        plan.dp = DpParams{epsilon, samples};
        const auto result = train_flynn_fl(plan);
        const double acc = test_accuracy(result.models.front(), test_data);
        accs.push_back(acc);
        writer.add({experiment_id, "flynn_fl_dp",
                    base_params + ";eps=" + format_double(epsilon) +
                        ";T=" + std::to_string(samples),
                    -1, static_cast<int>(rep), acc, std::nan(""),
                    result.wall_seconds * 1000.0, result.total_bytes_sent(),
                    result.total_bytes_received(), plan.root_seed});
      }
      DpSweepCell cell;
      cell.epsilon = epsilon;
      cell.samples = samples;
      cell.mean_accuracy = mean_of(accs);
      cell.std_error = std_error_of(accs);
      summary.cells.push_back(cell);
      best = std::max(best, cell.mean_accuracy);
    }
    summary.best_accuracy_per_epsilon.push_back(best);
  }
  return summary;
}

}  // namespace flynn

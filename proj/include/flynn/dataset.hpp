#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "flynn/error.hpp"
#include "flynn/rng.hpp"

namespace flynn {

// Labeled feature matrix, row-major. Labels are internal indices into a
// label table that maps them back to external names; the table is shared by
// every shard and fold cut from the same dataset.
class Dataset {
 public:
  Dataset() = default;
  Dataset(std::uint32_t dim, std::vector<std::string> label_table,
          std::string provenance = {})
      : dim_(dim),
        label_table_(std::move(label_table)),
        provenance_(std::move(provenance)) {}

  std::uint32_t dim() const { return dim_; }
  std::size_t size() const { return labels_.size(); }
  std::uint32_t num_classes() const {
    return static_cast<std::uint32_t>(label_table_.size());
  }
  const std::vector<std::string>& label_table() const { return label_table_; }
  const std::string& provenance() const { return provenance_; }
  const std::vector<double>& features() const { return features_; }
  const std::vector<std::uint32_t>& labels() const { return labels_; }

  std::span<const double> row(std::size_t i) const {
    return {features_.data() + i * dim_, dim_};
  }
  std::uint32_t label(std::size_t i) const { return labels_[i]; }

  void append(std::span<const double> x, std::uint32_t label) {
    if (x.size() != dim_) throw DataError("Dataset::append: dimension mismatch");
    if (label >= label_table_.size())
      throw DataError("Dataset::append: label index out of range");
    for (double v : x)
      if (!std::isfinite(v))
        throw DataError("Dataset::append: non-finite feature");
    features_.insert(features_.end(), x.begin(), x.end());
    labels_.push_back(label);
  }

  Dataset subset(std::span<const std::uint32_t> indices) const {
    Dataset out(dim_, label_table_, provenance_);
    out.features_.reserve(indices.size() * dim_);
    out.labels_.reserve(indices.size());
    for (std::uint32_t i : indices) out.append(row(i), labels_[i]);
    return out;
  }

  std::vector<std::size_t> class_sizes() const {
    std::vector<std::size_t> sizes(label_table_.size(), 0);
    for (std::uint32_t y : labels_) ++sizes[y];
    return sizes;
  }

 private:
  std::uint32_t dim_ = 0;
  std::vector<double> features_;
  std::vector<std::uint32_t> labels_;
  std::vector<std::string> label_table_;
  std::string provenance_;
};

struct TrainTestSplit {
  std::vector<std::uint32_t> train_indices;
  std::vector<std::uint32_t> test_indices;
};

// k disjoint covering folds; fold f's test set is the f-th block of a
// seed-deterministic shuffle.
inline std::vector<TrainTestSplit> kfold(const Dataset& data, std::uint32_t k,
                                         std::uint64_t seed) {
  const std::size_t n = data.size();
  if (k < 2 || k > n)
    throw ConfigError("kfold: need 2 <= k <= n, got k=" + std::to_string(k) +
                      " n=" + std::to_string(n));
  std::vector<std::uint32_t> order(n);
  std::iota(order.begin(), order.end(), 0u);
  Rng rng = Rng(seed).substream(rng_tag::kShuffle);
  for (std::size_t i = n; i > 1; --i)
    std::swap(order[i - 1], order[rng.next_below(i)]);

  std::vector<TrainTestSplit> splits(k);
  for (std::uint32_t f = 0; f < k; ++f) {
    const std::size_t lo = n * f / k;
    const std::size_t hi = n * (f + 1) / k;
    auto& split = splits[f];
    split.test_indices.assign(order.begin() + lo, order.begin() + hi);
    split.train_indices.reserve(n - (hi - lo));
    split.train_indices.insert(split.train_indices.end(), order.begin(),
                               order.begin() + lo);
    split.train_indices.insert(split.train_indices.end(), order.begin() + hi,
                               order.end());
  }
  return splits;
}

enum class ShardPolicy { kRoundRobin, kByClass };

// Split a dataset into tau disjoint covering shards. Round-robin deals rows
// in order; by-class assigns whole classes to parties (class l to party
// l % tau), the fully non-IID stress case.
inline std::vector<Dataset> shard(const Dataset& data, std::uint32_t tau,
                                  ShardPolicy policy) {
  if (tau < 1 || tau > data.size())
    throw ConfigError("shard: need 1 <= tau <= n");
  std::vector<std::vector<std::uint32_t>> parts(tau);
  for (std::uint32_t i = 0; i < data.size(); ++i) {
    const std::uint32_t target = policy == ShardPolicy::kRoundRobin
                                     ? i % tau
                                     : data.label(i) % tau;
    parts[target].push_back(i);
  }
  std::vector<Dataset> shards;
  shards.reserve(tau);
  for (const auto& part : parts) shards.push_back(data.subset(part));
  return shards;
}

// Rescale every feature column to [0, 1] (constant columns map to 0).
inline Dataset minmax_scale(const Dataset& data) {
  const std::uint32_t d = data.dim();
  std::vector<double> lo(d, std::numeric_limits<double>::infinity());
  std::vector<double> hi(d, -std::numeric_limits<double>::infinity());
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto x = data.row(i);
    for (std::uint32_t j = 0; j < d; ++j) {
      lo[j] = std::min(lo[j], x[j]);
      hi[j] = std::max(hi[j], x[j]);
    }
  }
  Dataset out(d, data.label_table(), data.provenance() + " minmax");
  std::vector<double> scaled(d);
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto x = data.row(i);
    for (std::uint32_t j = 0; j < d; ++j) {
      const double range = hi[j] - lo[j];
      scaled[j] = range > 0.0 ? (x[j] - lo[j]) / range : 0.0;
    }
    out.append(scaled, data.label(i));
  }
  return out;
}

// 1 - a / a_k: zero for the reference tuned kNN itself, negative when the
// method beats it.
inline double normalized_accuracy(double accuracy, double knn_accuracy) {
  if (knn_accuracy <= 0.0)
    throw DataError("normalized_accuracy: reference accuracy must be > 0");
  return 1.0 - accuracy / knn_accuracy;
}

}  // namespace flynn

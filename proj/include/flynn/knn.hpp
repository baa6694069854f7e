#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <span>
#include <vector>

#include "flynn/dataset.hpp"
#include "flynn/error.hpp"

namespace flynn {

// Similarity orderings for the brute-force neighbor search. Higher is more
// similar for every kind.
enum class SimilarityKind { kNegativeEuclidean, kNegativeLinf, kCosine };

inline double similarity(std::span<const double> a, std::span<const double> b,
                         SimilarityKind kind) {
  if (a.size() != b.size()) throw DataError("similarity: dimension mismatch");
  switch (kind) {
    case SimilarityKind::kNegativeEuclidean: {
      double acc = 0.0;
      for (std::size_t j = 0; j < a.size(); ++j) {
        const double diff = a[j] - b[j];
        acc += diff * diff;
      }
      return -std::sqrt(acc);
    }
    case SimilarityKind::kNegativeLinf: {
      double acc = 0.0;
      for (std::size_t j = 0; j < a.size(); ++j)
        acc = std::max(acc, std::abs(a[j] - b[j]));
      return -acc;
    }
    case SimilarityKind::kCosine: {
      double dot = 0.0, na = 0.0, nb = 0.0;
      for (std::size_t j = 0; j < a.size(); ++j) {
        dot += a[j] * b[j];
        na += a[j] * a[j];
        nb += b[j] * b[j];
      }
      const double denom = std::sqrt(na) * std::sqrt(nb);
      return denom > 0.0 ? dot / denom : 0.0;
    }
  }
  throw InternalError("similarity: unknown kind");
}

// Indices of the k most similar training points, ties in similarity broken by
// the smaller training index.
inline std::vector<std::uint32_t> top_k_neighbors(const Dataset& train,
                                                  std::span<const double> x,
                                                  std::uint32_t k,
                                                  SimilarityKind kind) {
  if (k < 1 || k > train.size())
    throw ConfigError("knn: need 1 <= k <= n, got k=" + std::to_string(k));
  std::vector<std::pair<double, std::uint32_t>> scored(train.size());
  for (std::uint32_t i = 0; i < train.size(); ++i)
    scored[i] = {similarity(x, train.row(i), kind), i};
  std::partial_sort(scored.begin(), scored.begin() + k, scored.end(),
                    [](const auto& a, const auto& b) {
                      if (a.first != b.first) return a.first > b.first;
                      return a.second < b.second;
                    });
  std::vector<std::uint32_t> out(k);
  for (std::uint32_t i = 0; i < k; ++i) out[i] = scored[i].second;
  return out;
}

// Majority label among a set of training indices, vote ties broken by the
// smallest internal class index.
inline std::uint32_t majority_label(const Dataset& train,
                                    std::span<const std::uint32_t> indices) {
  std::vector<std::uint32_t> votes(train.num_classes(), 0);
  for (std::uint32_t i : indices) ++votes[train.label(i)];
  std::uint32_t best = 0;
  for (std::uint32_t l = 1; l < votes.size(); ++l)
    if (votes[l] > votes[best]) best = l;
  return best;
}

inline std::uint32_t knn_classify(const Dataset& train,
                                  std::span<const double> x, std::uint32_t k,
                                  SimilarityKind kind =
                                      SimilarityKind::kNegativeEuclidean) {
  const auto neighbors = top_k_neighbors(train, x, k, kind);
  return majority_label(train, neighbors);
}

// Minimum L-infinity distance between opposite-class training points.
// Defined for two-class data only.
inline double margin(const Dataset& data) {
  if (data.num_classes() != 2)
    throw DataError("margin: defined for exactly 2 classes, got " +
                    std::to_string(data.num_classes()));
  const auto sizes = data.class_sizes();
  if (sizes[0] == 0 || sizes[1] == 0)
    throw DataError("margin: both classes must be nonempty");
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (data.label(i) != 0) continue;
    for (std::size_t j = 0; j < data.size(); ++j) {
      if (data.label(j) != 1) continue;
      best = std::min(best, -similarity(data.row(i), data.row(j),
                                        SimilarityKind::kNegativeLinf));
    }
  }
  return best;
}

// Distance from x to its k-th nearest training point (1-indexed), L-infinity
// by default.
inline double kth_nn_distance(const Dataset& train, std::span<const double> x,
                              std::uint32_t k,
                              SimilarityKind kind =
                                  SimilarityKind::kNegativeLinf) {
  const auto neighbors = top_k_neighbors(train, x, k, kind);
  return -similarity(x, train.row(neighbors.back()), kind);
}

}  // namespace flynn

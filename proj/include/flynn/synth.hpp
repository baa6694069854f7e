#pragma once

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <set>
#include <string>
#include <vector>

#include "flynn/dataset.hpp"
#include "flynn/error.hpp"
#include "flynn/rng.hpp"

namespace flynn {

// Synthetic multi-modal classification data: every cluster is a unit-variance
// spherical Gaussian centered on a random vertex of a hypercube spanning a
// small informative coordinate subspace (the other coordinates of a center
// are 0, i.e. pure noise). Clusters are assigned to classes round-robin,
// class sizes are balanced and labels are noise-free. Such data favors
// neighborhood classifiers while keeping the classes far from linearly
// separable: with ~2^k clusters crammed into a k-dimensional vertex set, no
// hyperplane arrangement can carve the classes apart.
struct SynthSpec {
  std::size_t n = 1000;
  std::uint32_t d = 50;
  std::uint32_t classes = 5;
  std::uint32_t clusters_per_class = 3;
  double class_sep = 2.0;
  std::uint64_t seed = 0;
  // Dimension of the informative subspace; 0 picks the smallest k with
  // 2^k >= classes * clusters_per_class plus one spare bit.
  std::uint32_t informative = 0;
  // 0 = continuous output; otherwise keep the top-b coordinates per row as 1.
  std::uint32_t binarize_b = 0;

  std::uint32_t informative_dims() const {
    if (informative > 0) return informative;
    const std::uint64_t clusters =
        static_cast<std::uint64_t>(classes) * clusters_per_class;
    std::uint32_t k = 1;
    while ((1ULL << k) < clusters) ++k;
    return std::min(k + 1, d);
  }
};

inline Dataset binarize(const Dataset& data, std::uint32_t b);

inline Dataset make_classification(const SynthSpec& spec) {
  if (spec.n == 0 || spec.d == 0 || spec.classes == 0 ||
      spec.clusters_per_class == 0)
    throw ConfigError("make_classification: n, d, classes, clusters must be positive");
  const std::uint64_t num_clusters =
      static_cast<std::uint64_t>(spec.classes) * spec.clusters_per_class;
  const std::uint32_t k = spec.informative_dims();
  if (k > spec.d)
    throw ConfigError("make_classification: informative dims exceed d");
  if (k < 64 && num_clusters > (1ULL << k))
    throw ConfigError("make_classification: more cluster centers than hypercube vertices");
  if (spec.class_sep <= 0.0)
    throw ConfigError("make_classification: class_sep must be positive");

  Rng rng = Rng(spec.seed).substream(rng_tag::kSynthData);

  // Random informative coordinate subset.
  std::vector<std::uint32_t> coords(spec.d);
  for (std::uint32_t j = 0; j < spec.d; ++j) coords[j] = j;
  for (std::uint32_t j = 0; j < k; ++j)
    std::swap(coords[j], coords[j + rng.next_below(spec.d - j)]);
  coords.resize(k);

  // Distinct random hypercube vertices in {-class_sep, +class_sep}^k,
  // embedded at the informative coordinates.
  std::vector<double> centers(num_clusters * spec.d, 0.0);
  std::set<std::uint64_t> used;
  for (std::uint64_t c = 0; c < num_clusters; ++c) {
    std::uint64_t vertex;
    do {
      vertex = k >= 64 ? rng.next_u64() : rng.next_below(1ULL << k);
    } while (!used.insert(vertex).second);
    for (std::uint32_t j = 0; j < k; ++j)
      centers[c * spec.d + coords[j]] =
          ((vertex >> j) & 1u) ? spec.class_sep : -spec.class_sep;
  }

  std::vector<std::string> labels(spec.classes);
  for (std::uint32_t l = 0; l < spec.classes; ++l)
    labels[l] = std::to_string(l);
  Dataset out(spec.d, std::move(labels),
              "synth(n=" + std::to_string(spec.n) + ",d=" +
                  std::to_string(spec.d) + ",L=" +
                  std::to_string(spec.classes) + ",C=" +
                  std::to_string(spec.clusters_per_class) + ",sep=" +
                  std::to_string(spec.class_sep) + ",seed=" +
                  std::to_string(spec.seed) + ")");

  // Balanced classes (exact to +-1): row i belongs to class i % L and to that
  // class' clusters round-robin.
  std::vector<double> point(spec.d);
  for (std::size_t i = 0; i < spec.n; ++i) {
    const std::uint32_t label = static_cast<std::uint32_t>(i % spec.classes);
    const std::uint32_t within = static_cast<std::uint32_t>(
        (i / spec.classes) % spec.clusters_per_class);
    // Cluster c serves class c % L.
    const std::uint64_t cluster = within * spec.classes + label;
    const double* center = centers.data() + cluster * spec.d;
    for (std::uint32_t j = 0; j < spec.d; ++j)
      point[j] = center[j] + rng.next_normal();
    out.append(point, label);
  }
  if (spec.binarize_b > 0) return binarize(out, spec.binarize_b);
  return out;
}

// Per row, set the b largest coordinates to 1 and the rest to 0. Value ties
// keep the smaller coordinate index.
inline Dataset binarize(const Dataset& data, std::uint32_t b) {
  if (b < 1 || b >= data.dim())
    throw ConfigError("binarize: need 1 <= b < d");
  Dataset out(data.dim(), data.label_table(),
              data.provenance() + " binarize(b=" + std::to_string(b) + ")");
  const std::uint32_t d = data.dim();
  std::vector<std::uint32_t> order(d);
  std::vector<double> row(d);
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto x = data.row(i);
    std::iota(order.begin(), order.end(), 0u);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::uint32_t a, std::uint32_t c) {
                       return x[a] > x[c];
                     });
    std::fill(row.begin(), row.end(), 0.0);
    for (std::uint32_t k = 0; k < b; ++k) row[order[k]] = 1.0;
    out.append(row, data.label(i));
  }
  return out;
}

}  // namespace flynn

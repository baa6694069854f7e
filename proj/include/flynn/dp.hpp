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
#include "flynn/wire.hpp"

namespace flynn {

// Privacy budget for one privatize() invocation (the federated driver passes
// the global budget divided by the party count) and the number of count
// entries the mechanism releases.
struct DpParams {
  double epsilon = 1.0;
  std::uint32_t samples = 1;  // T

  void validate(std::uint64_t flat_length) const {
    if (!(epsilon > 0.0)) throw ConfigError("dp: epsilon must be > 0");
    if (samples < 1 || samples > flat_length)
      throw ConfigError("dp: need 1 <= T <= m*L, got T=" +
                        std::to_string(samples) + " with m*L=" +
                        std::to_string(flat_length));
  }
};

// Sparse nonnegative real vector of privatized counts. Indices are sorted;
// values at unlisted indices are zero.
struct PrivatizedCounts {
  std::uint64_t length = 0;
  std::vector<std::uint32_t> indices;
  std::vector<double> values;

  std::size_t nonzeros() const {
    std::size_t k = 0;
    for (double v : values) k += v != 0.0;
    return k;
  }

  bool operator==(const PrivatizedCounts&) const = default;
};

// Laplace(0, scale) via inverse CDF; u = 1/2 maps to the median 0.
inline double laplace_from_uniform(double u, double scale) {
  if (!(scale > 0.0)) throw ConfigError("laplace: scale must be > 0");
  if (u < 0.5) return scale * std::log(2.0 * u);
  return -scale * std::log(2.0 * (1.0 - u));
}

// One uniform draw per sample; the draw is taken from (0, 1) so the log stays
// finite.
inline double sample_laplace(double scale, Rng& rng) {
  if (!(scale > 0.0)) throw ConfigError("laplace: scale must be > 0");
  const double u =
      (static_cast<double>(rng.next_u64() >> 11) + 0.5) * 0x1.0p-53;
  return laplace_from_uniform(u, scale);
}

// Iterative exponential mechanism over the flattened per-class counts:
// T rounds, each sampling a not-yet-selected index with probability
// proportional to exp(epsilon * c[i] / (4T)) computed from the original
// counts, then releasing max{c[i] + Laplace(2T/epsilon), 0} for it. Every
// unselected entry is zeroed. Selection weights are renormalized against the
// running maximum so the softmax stays finite for any epsilon.
inline PrivatizedCounts privatize(std::span<const std::uint32_t> counts,
                                  const DpParams& params, Rng& rng) {
  params.validate(counts.size());
  const std::uint32_t rounds = params.samples;
  const double exponent_scale = params.epsilon / (4.0 * rounds);
  const double noise_scale = 2.0 * rounds / params.epsilon;

  std::vector<bool> selected(counts.size(), false);
  std::vector<std::uint32_t> picked;
  picked.reserve(rounds);

  for (std::uint32_t round = 0; round < rounds; ++round) {
    double max_exponent = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < counts.size(); ++i)
      if (!selected[i])
        max_exponent = std::max(max_exponent, counts[i] * exponent_scale);

    double total = 0.0;
    for (std::size_t i = 0; i < counts.size(); ++i)
      if (!selected[i])
        total += std::exp(counts[i] * exponent_scale - max_exponent);

    const double target = rng.next_double() * total;
    double acc = 0.0;
    std::size_t chosen = counts.size();
    for (std::size_t i = 0; i < counts.size(); ++i) {
      if (selected[i]) continue;
      acc += std::exp(counts[i] * exponent_scale - max_exponent);
      chosen = i;
      if (acc > target) break;
    }
    selected[chosen] = true;
    picked.push_back(static_cast<std::uint32_t>(chosen));
  }

  std::sort(picked.begin(), picked.end());
  PrivatizedCounts out;
  out.length = counts.size();
  out.indices = picked;
  out.values.reserve(picked.size());
  // Noise draws happen in sorted-index order, one Laplace sample per
  // selected entry.
  for (std::uint32_t i : picked) {
    const double noisy = counts[i] + sample_laplace(noise_scale, rng);
    out.values.push_back(std::max(noisy, 0.0));
  }
  return out;
}

// Element-wise sum of sparse vectors; used by the all-reduce on the private
// path. The union support can grow up to the sum of the operand supports.
inline PrivatizedCounts merge_privatized(const PrivatizedCounts& a,
                                         const PrivatizedCounts& b) {
  if (a.length != b.length)
    throw DataError("merge_privatized: length mismatch");
  PrivatizedCounts out;
  out.length = a.length;
  std::size_t i = 0, j = 0;
  while (i < a.indices.size() || j < b.indices.size()) {
    if (j == b.indices.size() ||
        (i < a.indices.size() && a.indices[i] < b.indices[j])) {
      out.indices.push_back(a.indices[i]);
      out.values.push_back(a.values[i]);
      ++i;
    } else if (i == a.indices.size() || b.indices[j] < a.indices[i]) {
      out.indices.push_back(b.indices[j]);
      out.values.push_back(b.values[j]);
      ++j;
    } else {
      out.indices.push_back(a.indices[i]);
      out.values.push_back(a.values[i] + b.values[j]);
      ++i;
      ++j;
    }
  }
  return out;
}

inline std::vector<double> to_dense(const PrivatizedCounts& sparse) {
  std::vector<double> dense(sparse.length, 0.0);
  for (std::size_t k = 0; k < sparse.indices.size(); ++k)
    dense[sparse.indices[k]] = sparse.values[k];
  return dense;
}

// Wire format: varint vector length, varint entry count, then (varint index,
// f64 value) pairs in index order.
inline Bytes sparse_encode(const PrivatizedCounts& sparse) {
  ByteWriter w;
  w.varint(sparse.length);
  w.varint(sparse.indices.size());
  for (std::size_t k = 0; k < sparse.indices.size(); ++k) {
    w.varint(sparse.indices[k]);
    w.f64(sparse.values[k]);
  }
  return w.take();
}

inline PrivatizedCounts sparse_decode(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes);
  PrivatizedCounts out;
  out.length = r.varint();
  const auto entries = r.varint();
  if (entries > out.length)
    throw DataError("sparse counts: more entries than vector length");
  out.indices.reserve(entries);
  out.values.reserve(entries);
  std::uint64_t prev = 0;
  for (std::uint64_t k = 0; k < entries; ++k) {
    const auto index = r.varint();
    if (index >= out.length)
      throw DataError("sparse counts: index out of range");
    if (k > 0 && index <= prev)
      throw DataError("sparse counts: indices not strictly increasing");
    prev = index;
    out.indices.push_back(static_cast<std::uint32_t>(index));
    out.values.push_back(r.f64());
  }
  if (r.remaining() != 0) throw DataError("sparse counts: trailing bytes");
  return out;
}

}  // namespace flynn

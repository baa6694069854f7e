#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "flynn/error.hpp"
#include "flynn/rng.hpp"

namespace flynn {

// Sparse binary vector: sorted positions of the 1-bits.
struct SparseBitVector {
  std::uint32_t length = 0;
  std::vector<std::uint32_t> ones;

  bool operator==(const SparseBitVector&) const = default;
};

// Sparse binary lifting matrix, m rows by d columns with exactly s ones per
// row. Stored CSR-style as m runs of s sorted column indices; the full matrix
// is never materialized or serialized, only (seed, m, d, s) is persisted and
// the matrix is regenerated bit-exactly on every party.
class LiftingMatrix {
 public:
  LiftingMatrix(std::uint64_t seed, std::uint32_t m, std::uint32_t d,
                std::uint32_t s)
      : seed_(seed), m_(m), d_(d), s_(s) {
    if (m < 1) throw ConfigError("lifting matrix: m must be >= 1");
    if (s < 1 || s > d)
      throw ConfigError("lifting matrix: s must satisfy 1 <= s <= d, got s=" +
                        std::to_string(s) + " d=" + std::to_string(d));
    Rng rng = Rng(seed).substream(rng_tag::kLiftingMatrix);
    cols_.resize(static_cast<std::size_t>(m) * s);
    // Per-row s-subset of [0, d) by partial Fisher-Yates over a reusable
    // index pool; swaps are undone in reverse after each row, so a row costs
    // O(s) instead of O(d).
    std::vector<std::uint32_t> pool(d);
    for (std::uint32_t j = 0; j < d; ++j) pool[j] = j;
    std::vector<std::uint32_t> picks(s);
    for (std::uint32_t i = 0; i < m; ++i) {
      std::uint32_t* row = cols_.data() + static_cast<std::size_t>(i) * s;
      for (std::uint32_t k = 0; k < s; ++k) {
        picks[k] = k + static_cast<std::uint32_t>(rng.next_below(d - k));
        std::swap(pool[k], pool[picks[k]]);
        row[k] = pool[k];
      }
      for (std::uint32_t k = s; k-- > 0;) std::swap(pool[k], pool[picks[k]]);
      std::sort(row, row + s);
    }
  }

  std::uint64_t seed() const { return seed_; }
  std::uint32_t rows() const { return m_; }
  std::uint32_t cols() const { return d_; }
  std::uint32_t ones_per_row() const { return s_; }

  std::span<const std::uint32_t> row(std::uint32_t i) const {
    return {cols_.data() + static_cast<std::size_t>(i) * s_, s_};
  }

 private:
  std::uint64_t seed_;
  std::uint32_t m_, d_, s_;
  std::vector<std::uint32_t> cols_;
};

namespace detail {

inline void check_finite(std::span<const double> x, const char* where) {
  for (double v : x) {
    if (!std::isfinite(v))
      throw DataError(std::string(where) + ": non-finite input coordinate");
  }
}

// Keeps the rho best (activation, index) pairs seen so far in a min-heap.
// Ordering: higher activation wins; equal activations prefer the smaller
// index, so the selection is deterministic.
struct TopRhoHeap {
  struct Entry {
    double value;
    std::uint32_t index;
  };
  // true when a is worse than b.
  static bool worse(const Entry& a, const Entry& b) {
    if (a.value != b.value) return a.value < b.value;
    return a.index > b.index;
  }
  static bool heap_cmp(const Entry& a, const Entry& b) {
    return worse(b, a);  // min-heap on "quality": worst entry on top
  }

  explicit TopRhoHeap(std::uint32_t rho) : capacity(rho) {}

  void offer(double value, std::uint32_t index) {
    if (heap.size() < capacity) {
      heap.push_back({value, index});
      std::push_heap(heap.begin(), heap.end(), heap_cmp);
    } else if (worse(heap.front(), {value, index})) {
      std::pop_heap(heap.begin(), heap.end(), heap_cmp);
      heap.back() = {value, index};
      std::push_heap(heap.begin(), heap.end(), heap_cmp);
    }
  }

  std::vector<std::uint32_t> sorted_indices() {
    std::vector<std::uint32_t> out;
    out.reserve(heap.size());
    for (const auto& e : heap) out.push_back(e.index);
    std::sort(out.begin(), out.end());
    return out;
  }

  std::uint32_t capacity;
  std::vector<Entry> heap;
};

}  // namespace detail

// Winner-take-all selection: 1-bits at the rho largest activations, ties
// resolved toward the smaller index.
inline SparseBitVector winner_take_all(std::span<const double> activations,
                                       std::uint32_t rho) {
  if (rho > activations.size())
    throw ConfigError("winner_take_all: rho exceeds activation length");
  detail::TopRhoHeap top(rho);
  for (std::uint32_t i = 0; i < activations.size(); ++i)
    top.offer(activations[i], i);
  return {static_cast<std::uint32_t>(activations.size()),
          top.sorted_indices()};
}

// FlyHash: lift x through the sparse binary matrix, keep the rho largest
// activations. Output has exactly rho ones.
inline SparseBitVector fly_hash(const LiftingMatrix& matrix, std::uint32_t rho,
                                std::span<const double> x) {
  if (x.size() != matrix.cols())
    throw DataError("fly_hash: input dimension " + std::to_string(x.size()) +
                    " does not match matrix columns " +
                    std::to_string(matrix.cols()));
  if (rho < 1 || rho > matrix.rows())
    throw ConfigError("fly_hash: rho must satisfy 1 <= rho <= m");
  detail::check_finite(x, "fly_hash");
  detail::TopRhoHeap top(rho);
  const std::uint32_t m = matrix.rows();
  for (std::uint32_t i = 0; i < m; ++i) {
    double acc = 0.0;
    for (std::uint32_t j : matrix.row(i)) acc += x[j];
    top.offer(acc, i);
  }
  return {m, top.sorted_indices()};
}

// Dense Gaussian projection for SimHash. Like the lifting matrix it is
// reconstructed from (seed, m, d); entries are standard normal.
class SimProjection {
 public:
  SimProjection(std::uint64_t seed, std::uint32_t m, std::uint32_t d)
      : seed_(seed), m_(m), d_(d) {
    if (m < 1 || d < 1) throw ConfigError("sim projection: m, d must be >= 1");
    Rng rng = Rng(seed).substream(rng_tag::kSimProjection);
    entries_.resize(static_cast<std::size_t>(m) * d);
    for (auto& v : entries_) v = rng.next_normal();
  }

  std::uint64_t seed() const { return seed_; }
  std::uint32_t rows() const { return m_; }
  std::uint32_t cols() const { return d_; }

  std::span<const double> row(std::uint32_t i) const {
    return {entries_.data() + static_cast<std::size_t>(i) * d_, d_};
  }

 private:
  std::uint64_t seed_;
  std::uint32_t m_, d_;
  std::vector<double> entries_;
};

// Sign bits of a dense row-major matrix-vector product: bit i is 1 iff
// row_i . x >= 0 (zero counts as positive).
inline SparseBitVector sign_hash(std::span<const double> matrix_row_major,
                                 std::uint32_t m, std::uint32_t d,
                                 std::span<const double> x) {
  if (x.size() != d) throw DataError("sign_hash: input dimension mismatch");
  if (matrix_row_major.size() != static_cast<std::size_t>(m) * d)
    throw DataError("sign_hash: matrix shape mismatch");
  detail::check_finite(x, "sign_hash");
  SparseBitVector out;
  out.length = m;
  for (std::uint32_t i = 0; i < m; ++i) {
    const double* row = matrix_row_major.data() + static_cast<std::size_t>(i) * d;
    double acc = 0.0;
    for (std::uint32_t j = 0; j < d; ++j) acc += row[j] * x[j];
    if (acc >= 0.0) out.ones.push_back(i);
  }
  return out;
}

// SimHash over the seeded Gaussian projection.
inline SparseBitVector sim_hash(const SimProjection& projection,
                                std::span<const double> x) {
  return sign_hash(
      {projection.row(0).data(),
       static_cast<std::size_t>(projection.rows()) * projection.cols()},
      projection.rows(), projection.cols(), x);
}

// Hash strategies behind one interface so the classifier is generic over the
// code it consumes.
class FlyHasher {
 public:
  FlyHasher(std::uint64_t seed, std::uint32_t m, std::uint32_t d,
            std::uint32_t s, std::uint32_t rho)
      : matrix_(seed, m, d, s), rho_(rho) {
    if (rho < 1 || rho > m)
      throw ConfigError("fly hasher: rho must satisfy 1 <= rho <= m");
  }

  std::uint32_t bits() const { return matrix_.rows(); }
  std::uint32_t input_dim() const { return matrix_.cols(); }
  std::uint32_t rho() const { return rho_; }
  const LiftingMatrix& matrix() const { return matrix_; }

  SparseBitVector operator()(std::span<const double> x) const {
    return fly_hash(matrix_, rho_, x);
  }

 private:
  LiftingMatrix matrix_;
  std::uint32_t rho_;
};

class SimHasher {
 public:
  SimHasher(std::uint64_t seed, std::uint32_t m, std::uint32_t d)
      : projection_(seed, m, d) {}

  std::uint32_t bits() const { return projection_.rows(); }
  std::uint32_t input_dim() const { return projection_.cols(); }
  const SimProjection& projection() const { return projection_; }

  SparseBitVector operator()(std::span<const double> x) const {
    return sim_hash(projection_, x);
  }

 private:
  SimProjection projection_;
};

}  // namespace flynn

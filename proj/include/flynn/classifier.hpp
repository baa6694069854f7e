#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "flynn/dataset.hpp"
#include "flynn/error.hpp"
#include "flynn/hash.hpp"

namespace flynn {

// Per-class bit counts backing the Fly Bloom Filters. Entry (l, i) is the
// number of training points of class l whose hash had bit i set. The filters
// themselves are derived lazily as w_l[i] = gamma^{counts(l, i)}; storing
// integer counts instead of decayed products keeps federated aggregation an
// exact integer sum and keeps gamma = 0 well-defined.
class ClassCounts {
 public:
  ClassCounts() = default;
  ClassCounts(std::uint32_t num_classes, std::uint32_t bits)
      : num_classes_(num_classes),
        bits_(bits),
        values_(static_cast<std::size_t>(num_classes) * bits, 0) {}

  std::uint32_t num_classes() const { return num_classes_; }
  std::uint32_t bits() const { return bits_; }
  const std::vector<std::uint32_t>& values() const { return values_; }
  std::vector<std::uint32_t>& values() { return values_; }

  std::uint32_t at(std::uint32_t cls, std::uint32_t bit) const {
    return values_[static_cast<std::size_t>(cls) * bits_ + bit];
  }

  void record(std::uint32_t cls, const SparseBitVector& hash) {
    auto* base = values_.data() + static_cast<std::size_t>(cls) * bits_;
    for (std::uint32_t i : hash.ones) ++base[i];
  }

  bool operator==(const ClassCounts&) const = default;

 private:
  std::uint32_t num_classes_ = 0;
  std::uint32_t bits_ = 0;
  std::vector<std::uint32_t> values_;
};

// Element-wise sum; associative, commutative, exact.
inline ClassCounts merge_counts(const ClassCounts& a, const ClassCounts& b) {
  if (a.num_classes() != b.num_classes() || a.bits() != b.bits())
    throw DataError("merge_counts: shape mismatch");
  ClassCounts out = a;
  for (std::size_t i = 0; i < out.values().size(); ++i)
    out.values()[i] += b.values()[i];
  return out;
}

enum class HashKind : std::uint8_t { kFly = 0, kSim = 1 };

// Everything needed to rebuild the hash function bit-exactly.
struct HashConfig {
  HashKind kind = HashKind::kFly;
  std::uint64_t seed = 0;
  std::uint32_t m = 0;    // lifted dimension
  std::uint32_t d = 0;    // input dimension
  std::uint32_t s = 0;    // nonzeros per lifting row (fly only)
  std::uint32_t rho = 0;  // nonzeros in the hash (fly only)

  bool operator==(const HashConfig&) const = default;
};

using Hasher = std::variant<FlyHasher, SimHasher>;

inline Hasher make_hasher(const HashConfig& config) {
  if (config.kind == HashKind::kFly)
    return FlyHasher(config.seed, config.m, config.d, config.s, config.rho);
  return SimHasher(config.seed, config.m, config.d);
}

inline SparseBitVector apply_hash(const Hasher& hasher,
                                  std::span<const double> x) {
  return std::visit([&](const auto& h) { return h(x); }, hasher);
}

struct NoveltyScores {
  std::vector<double> per_class;

  // argmin with ties to the smallest internal class index
  std::uint32_t best_class() const {
    std::uint32_t best = 0;
    for (std::uint32_t l = 1; l < per_class.size(); ++l)
      if (per_class[l] < per_class[best]) best = l;
    return best;
  }
};

// Decay weights w = gamma^c for integer counts, memoized per model. Exponent
// 0 yields exactly 1 for any gamma, including gamma = 0.
class DecayTable {
 public:
  explicit DecayTable(double gamma) : gamma_(gamma) { table_.push_back(1.0); }

  double operator()(std::uint32_t count) const {
    if (gamma_ == 0.0) return count == 0 ? 1.0 : 0.0;
    while (table_.size() <= count)
      table_.push_back(table_.back() * gamma_);
    return table_[count];
  }

 private:
  double gamma_;
  mutable std::vector<double> table_;
};

inline double decay_real(double gamma, double count) {
  if (count == 0.0) return 1.0;
  if (gamma == 0.0) return 0.0;
  return std::exp(count * std::log(gamma));
}

// A trained model: hash parameters, decay rate, label table, and per-class
// counts. Counts are integers after local or non-private federated training;
// the differentially private path produces real-valued noisy counts. Models
// are immutable after construction and safe to share across threads.
class FlyNnModel {
 public:
  FlyNnModel(HashConfig hash_config, std::string gamma_text,
             std::vector<std::string> label_table, ClassCounts counts)
      : hash_config_(hash_config),
        gamma_text_(std::move(gamma_text)),
        gamma_(parse_gamma(gamma_text_)),
        label_table_(std::move(label_table)),
        counts_(std::move(counts)),
        decay_(gamma_),
        hasher_(std::make_shared<Hasher>(make_hasher(hash_config_))) {
    check_shape(counts_int().num_classes(), counts_int().bits());
  }

  FlyNnModel(HashConfig hash_config, std::string gamma_text,
             std::vector<std::string> label_table,
             std::vector<double> real_counts, std::uint32_t num_classes)
      : hash_config_(hash_config),
        gamma_text_(std::move(gamma_text)),
        gamma_(parse_gamma(gamma_text_)),
        label_table_(std::move(label_table)),
        counts_(RealCounts{num_classes, std::move(real_counts)}),
        decay_(gamma_),
        hasher_(std::make_shared<Hasher>(make_hasher(hash_config_))) {
    const auto& rc = std::get<RealCounts>(counts_);
    if (rc.values.size() !=
        static_cast<std::size_t>(num_classes) * hash_config_.m)
      throw DataError("model: real count vector has wrong length");
    check_shape(num_classes, hash_config_.m);
  }

  const HashConfig& hash_config() const { return hash_config_; }
  const std::string& gamma_text() const { return gamma_text_; }
  double gamma() const { return gamma_; }
  const std::vector<std::string>& label_table() const { return label_table_; }
  std::uint32_t num_classes() const {
    return static_cast<std::uint32_t>(label_table_.size());
  }
  const Hasher& hasher() const { return *hasher_; }

  bool has_integer_counts() const {
    return std::holds_alternative<ClassCounts>(counts_);
  }
  const ClassCounts& counts_int() const {
    return std::get<ClassCounts>(counts_);
  }
  std::span<const double> counts_real() const {
    return std::get<RealCounts>(counts_).values;
  }

  // Per-class novelty scores for a hash: sigma_l = sum over 1-bits of
  // gamma^{c_l[i]}. Bounded by [0, |ones|].
  NoveltyScores score_hash(const SparseBitVector& hash) const {
    NoveltyScores scores;
    scores.per_class.assign(num_classes(), 0.0);
    if (has_integer_counts()) {
      const auto& counts = counts_int();
      for (std::uint32_t l = 0; l < num_classes(); ++l) {
        double acc = 0.0;
        for (std::uint32_t i : hash.ones) acc += decay_(counts.at(l, i));
        scores.per_class[l] = acc;
      }
    } else {
      const auto values = counts_real();
      const std::uint32_t m = hash_config_.m;
      for (std::uint32_t l = 0; l < num_classes(); ++l) {
        const double* base = values.data() + static_cast<std::size_t>(l) * m;
        double acc = 0.0;
        for (std::uint32_t i : hash.ones) acc += decay_real(gamma_, base[i]);
        scores.per_class[l] = acc;
      }
    }
    return scores;
  }

  static double parse_gamma(const std::string& text) {
    double value = 0.0;
    const auto [ptr, ec] =
        std::from_chars(text.data(), text.data() + text.size(), value);
    if (ec != std::errc{} || ptr != text.data() + text.size())
      throw DataError("model: cannot parse gamma '" + text + "'");
    if (!(value >= 0.0 && value < 1.0))
      throw ConfigError("model: gamma must be in [0, 1), got " + text);
    return value;
  }

 private:
  struct RealCounts {
    std::uint32_t num_classes = 0;
    std::vector<double> values;
  };

  void check_shape(std::uint32_t num_classes, std::uint32_t bits) const {
    if (num_classes != label_table_.size())
      throw DataError("model: counts class dimension does not match label table");
    if (bits != hash_config_.m)
      throw DataError("model: counts bit dimension does not match hash");
  }

  HashConfig hash_config_;
  std::string gamma_text_;
  double gamma_;
  std::vector<std::string> label_table_;
  std::variant<ClassCounts, RealCounts> counts_;
  DecayTable decay_;
  std::shared_ptr<const Hasher> hasher_;
};

// Hash every row of a dataset once; shared by training and the experiment
// harness (hashes do not depend on fold membership).
inline std::vector<SparseBitVector> hash_dataset(const Hasher& hasher,
                                                 const Dataset& data) {
  std::vector<SparseBitVector> hashes;
  hashes.reserve(data.size());
  for (std::size_t i = 0; i < data.size(); ++i)
    hashes.push_back(apply_hash(hasher, data.row(i)));
  return hashes;
}

inline ClassCounts accumulate_counts(std::uint32_t num_classes,
                                     std::uint32_t bits,
                                     const std::vector<SparseBitVector>& hashes,
                                     const std::vector<std::uint32_t>& labels) {
  ClassCounts counts(num_classes, bits);
  for (std::size_t i = 0; i < hashes.size(); ++i)
    counts.record(labels[i], hashes[i]);
  return counts;
}

// Single-pass training: hash each point and bump its class' counts at the
// hash's 1-bits. Increment order never matters, so any shard partition of the
// data aggregates to the identical model.
inline FlyNnModel train(const Dataset& data, const HashConfig& hash_config,
                        const std::string& gamma_text) {
  if (data.size() == 0) throw DataError("train: empty dataset");
  if (data.dim() != hash_config.d)
    throw DataError("train: dataset dimension " + std::to_string(data.dim()) +
                    " does not match hash input dimension " +
                    std::to_string(hash_config.d));
  if (data.num_classes() == 0) throw DataError("train: empty label table");
  const Hasher hasher = make_hasher(hash_config);
  ClassCounts counts(data.num_classes(), hash_config.m);
  for (std::size_t i = 0; i < data.size(); ++i)
    counts.record(data.label(i), apply_hash(hasher, data.row(i)));
  return FlyNnModel(hash_config, gamma_text, data.label_table(),
                    std::move(counts));
}

inline FlyNnModel train(const Dataset& data, std::uint64_t seed,
                        std::uint32_t m, std::uint32_t s, std::uint32_t rho,
                        const std::string& gamma_text) {
  return train(data,
               HashConfig{HashKind::kFly, seed, m, data.dim(), s, rho},
               gamma_text);
}

// SimHash Bloom Filter classifier: same training loop with the dense-
// projection hash swapped in. The filter is kept binary (gamma = 0).
inline FlyNnModel train_sbfc(const Dataset& data, std::uint32_t m,
                             std::uint64_t seed,
                             const std::string& gamma_text = "0") {
  return train(data, HashConfig{HashKind::kSim, seed, m, data.dim(), 0, 0},
               gamma_text);
}

inline NoveltyScores novelty_scores(const FlyNnModel& model,
                                    std::span<const double> x) {
  if (x.size() != model.hash_config().d)
    throw DataError("novelty_scores: query dimension mismatch");
  return model.score_hash(apply_hash(model.hasher(), x));
}

struct Prediction {
  std::uint32_t label_index;
  NoveltyScores scores;
};

// Label with the least novel class; score ties go to the smallest internal
// class index.
inline Prediction infer(const FlyNnModel& model, std::span<const double> x) {
  auto scores = novelty_scores(model, x);
  const std::uint32_t best = scores.best_class();
  return {best, std::move(scores)};
}

}  // namespace flynn

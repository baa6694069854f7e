#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "flynn/classifier.hpp"
#include "flynn/dataset.hpp"
#include "flynn/error.hpp"
#include "flynn/knn.hpp"
#include "flynn/rng.hpp"
#include "flynn/synth.hpp"

namespace flynn {

// Draws theta uniformly from the binary vectors with exactly s ones, i.e.
// the distribution of a single lifting-matrix row.
class ThetaSampler {
 public:
  ThetaSampler(std::uint32_t d, std::uint32_t s, std::uint64_t seed)
      : d_(d), s_(s), rng_(seed) {
    if (s < 1 || s > d) throw ConfigError("theta sampler: need 1 <= s <= d");
    pool_.resize(d);
    for (std::uint32_t j = 0; j < d; ++j) pool_[j] = j;
    picks_.resize(s);
  }

  std::uint32_t dim() const { return d_; }
  std::uint32_t ones() const { return s_; }

  // theta . x for a fresh draw of theta.
  double dot(std::span<const double> x) {
    double acc = 0.0;
    draw([&](std::uint32_t j) { acc += x[j]; });
    return acc;
  }

  // One draw of theta dotted against two vectors at once (shared theta).
  void dot_pair(std::span<const double> x, std::span<const double> y,
                double& dot_x, double& dot_y) {
    double ax = 0.0, ay = 0.0;
    draw([&](std::uint32_t j) {
      ax += x[j];
      ay += y[j];
    });
    dot_x = ax;
    dot_y = ay;
  }

 private:
  // Partial Fisher-Yates s-subset; swaps undone afterwards so a draw is O(s).
  template <typename Visit>
  void draw(Visit visit) {
    for (std::uint32_t k = 0; k < s_; ++k) {
      picks_[k] = k + static_cast<std::uint32_t>(rng_.next_below(d_ - k));
      std::swap(pool_[k], pool_[picks_[k]]);
      visit(pool_[k]);
    }
    for (std::uint32_t k = s_; k-- > 0;) std::swap(pool_[k], pool_[picks_[k]]);
  }

  std::uint32_t d_, s_;
  Rng rng_;
  std::vector<std::uint32_t> pool_;
  std::vector<std::uint32_t> picks_;
};

namespace detail {

// Largest v among the samples whose empirical upper-tail probability is
// still >= f: the ceil(f*N)-th largest sample.
inline double empirical_fractile(std::vector<double> samples, double f) {
  const std::size_t n = samples.size();
  const std::size_t k = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::ceil(f * static_cast<double>(n))));
  const std::size_t rank = std::min(k, n) - 1;
  std::nth_element(samples.begin(), samples.begin() + rank, samples.end(),
                   std::greater<>());
  return samples[rank];
}

}  // namespace detail

// Top f-fractile of theta . x estimated from `samples` draws.
inline double estimate_fractile(std::span<const double> x, std::uint32_t s,
                                double f, std::size_t samples,
                                std::uint64_t seed) {
  if (!(f > 0.0 && f < 1.0))
    throw ConfigError("estimate_fractile: need 0 < f < 1");
  if (samples < 1) throw ConfigError("estimate_fractile: need samples >= 1");
  ThetaSampler sampler(static_cast<std::uint32_t>(x.size()), s, seed);
  std::vector<double> dots(samples);
  for (auto& v : dots) v = sampler.dot(x);
  return detail::empirical_fractile(std::move(dots), f);
}

struct WilsonInterval {
  double estimate = 0.0;
  double lower = 0.0;
  double upper = 1.0;
};

inline WilsonInterval wilson_interval(std::size_t successes, std::size_t total,
                                      double z = 1.96) {
  if (total == 0) return {0.0, 0.0, 1.0};
  const double n = static_cast<double>(total);
  const double p = static_cast<double>(successes) / n;
  const double z2 = z * z;
  const double denom = 1.0 + z2 / n;
  const double center = p + z2 / (2.0 * n);
  const double spread = z * std::sqrt(p * (1.0 - p) / n + z2 / (4.0 * n * n));
  return {p, (center - spread) / denom, (center + spread) / denom};
}

struct QEstimate {
  double q = 0.0;
  WilsonInterval interval;
  std::size_t conditioning_hits = 0;
  std::size_t joint_hits = 0;
  // set when the conditioning event never occurred; q is then meaningless
  bool failed = false;
};

// Collision probability q(x, x'): the probability that a random theta
// activates for x' given that it activates for x, each activation taken at
// its own rho/m fractile threshold. Thresholds and the conditional frequency
// come from one shared batch of draws, which realizes the idealized
// "the fractile event has probability exactly rho/m" reading and makes
// q(x, x) exactly 1.
inline QEstimate estimate_q(std::span<const double> x,
                            std::span<const double> x_prime, std::uint32_t s,
                            std::uint32_t rho, std::uint32_t m,
                            std::size_t samples, std::uint64_t seed) {
  if (rho < 1 || rho > m) throw ConfigError("estimate_q: need 1 <= rho <= m");
  if (x.size() != x_prime.size())
    throw DataError("estimate_q: dimension mismatch");
  const double f = static_cast<double>(rho) / m;

  ThetaSampler sampler(static_cast<std::uint32_t>(x.size()), s, seed);
  std::vector<double> dots_x(samples), dots_xp(samples);
  for (std::size_t i = 0; i < samples; ++i)
    sampler.dot_pair(x, x_prime, dots_x[i], dots_xp[i]);

  const double tau_x = detail::empirical_fractile(dots_x, f);
  const double tau_xp = detail::empirical_fractile(dots_xp, f);

  std::size_t cond = 0, joint = 0;
  for (std::size_t i = 0; i < samples; ++i) {
    if (dots_x[i] >= tau_x) {
      ++cond;
      if (dots_xp[i] >= tau_xp) ++joint;
    }
  }
  QEstimate out;
  out.conditioning_hits = cond;
  out.joint_hits = joint;
  if (cond == 0) {
    out.failed = true;
    return out;
  }
  out.q = static_cast<double>(joint) / static_cast<double>(cond);
  out.interval = wilson_interval(joint, cond);
  return out;
}

// Half the gap between the rho/2m and rho/m fractiles of theta . x; the
// componentwise slack x'[i] >= x[i] - Delta/s is exactly the regime where
// q(x, x') >= 1/2.
inline double fractile_gap_delta(std::span<const double> x, std::uint32_t s,
                                 std::uint32_t rho, std::uint32_t m,
                                 std::size_t samples, std::uint64_t seed) {
  if (2 * static_cast<std::uint64_t>(rho) > m)
    throw ConfigError("fractile_gap_delta: need rho/m <= 1/2");
  const double tight = estimate_fractile(
      x, s, static_cast<double>(rho) / (2.0 * m), samples, seed);
  const double loose =
      estimate_fractile(x, s, static_cast<double>(rho) / m, samples, seed);
  return 0.5 * (tight - loose);
}

enum class PermutationInvariantDist { kGaussian, kSymmetricUniform };

struct MeanQResult {
  double mean = 0.0;
  double std_error = 0.0;
  std::size_t trials = 0;
  std::size_t failed_trials = 0;
};

// Monte-Carlo mean of q(x, x') for a fixed x' with x drawn from a
// permutation-invariant distribution. The expected value is rho / m.
inline MeanQResult permutation_invariant_q_check(
    std::span<const double> x_prime, std::uint32_t s, std::uint32_t rho,
    std::uint32_t m, std::size_t trials, std::size_t samples_per_trial,
    std::uint64_t seed,
    PermutationInvariantDist dist = PermutationInvariantDist::kGaussian) {
  Rng rng(seed);
  std::vector<double> x(x_prime.size());
  double sum = 0.0, sum_sq = 0.0;
  std::size_t ok = 0, failed = 0;
  for (std::size_t t = 0; t < trials; ++t) {
    for (auto& v : x)
      v = dist == PermutationInvariantDist::kGaussian
              ? rng.next_normal()
              : rng.next_double() * 2.0 - 1.0;
    const auto est = estimate_q(x, x_prime, s, rho, m, samples_per_trial,
                                rng.next_u64());
    if (est.failed) {
      ++failed;
      continue;
    }
    sum += est.q;
    sum_sq += est.q * est.q;
    ++ok;
  }
  MeanQResult out;
  out.trials = ok;
  out.failed_trials = failed;
  if (ok > 0) {
    out.mean = sum / static_cast<double>(ok);
    const double var =
        std::max(0.0, sum_sq / static_cast<double>(ok) - out.mean * out.mean);
    out.std_error = std::sqrt(var / static_cast<double>(ok));
  }
  return out;
}

struct AgreementSpec {
  std::size_t train_n = 20;
  // Keep C(d, s) well above m / rho: the theta dot-product support has
  // C(d, s) atoms, and the Delta fractile gap degenerates to zero once the
  // rho/m tail falls inside a single atom.
  std::uint32_t d = 32;
  double class_sep = 4.0;
  std::uint32_t m = 16384;
  std::uint32_t s = 3;
  std::uint32_t rho = 8;
  std::uint32_t k = 1;  // kNN neighborhood size
  std::size_t tests_per_seed = 25;
  std::uint32_t seeds = 40;
  // test points are training points plus uniform noise of this L-inf radius
  double perturbation = 0.05;
  // 0 = auto: enough draws that the rho/2m tail still holds ~20 samples
  std::size_t fractile_samples = 0;
  std::uint64_t seed = 1;

  std::size_t fractile_samples_or_auto() const {
    if (fractile_samples > 0) return fractile_samples;
    return std::max<std::size_t>(4000, 40ull * m / rho);
  }
};

struct AgreementResult {
  double agreement_all = 0.0;
  double agreement_on_satisfying = 0.0;
  double precondition_rate = 0.0;
  std::size_t total_points = 0;
  std::size_t satisfying_points = 0;
};

// Empirical agreement between the bloom-filter classifier (gamma = 0, the
// analyzed regime) and kNN on margin-controlled two-class data. Each test
// point is a perturbed training point; the result also reports how many test
// points satisfy the locality precondition
//   ||x - x*||_inf <= min(eta / 2, Delta_x / s)
// where x* is the ceil((k+1)/2)-th nearest neighbor and Delta_x the fractile
// gap above.
inline AgreementResult agreement_experiment(const AgreementSpec& spec) {
  std::size_t total = 0, agree_total = 0;
  std::size_t satisfying = 0, agree_satisfying = 0;

  for (std::uint32_t rep = 0; rep < spec.seeds; ++rep) {
    Rng rng = Rng(spec.seed + rep).substream(rng_tag::kShuffle);
    SynthSpec synth;
    synth.n = spec.train_n;
    synth.d = spec.d;
    synth.classes = 2;
    synth.clusters_per_class = 1;
    synth.class_sep = spec.class_sep;
    synth.seed = spec.seed * 1000003ULL + rep;
    const Dataset data = make_classification(synth);
    const double eta = margin(data);

    const FlyNnModel model =
        train(data, synth.seed, spec.m, spec.s, spec.rho, "0");
    const std::uint32_t half_k = (spec.k + 1 + 1) / 2;  // ceil((k+1)/2)

    std::vector<double> x(spec.d);
    for (std::size_t t = 0; t < spec.tests_per_seed; ++t) {
      const std::size_t base = rng.next_below(data.size());
      const auto anchor = data.row(base);
      for (std::uint32_t j = 0; j < spec.d; ++j)
        x[j] = anchor[j] + spec.perturbation * (2.0 * rng.next_double() - 1.0);

      const std::uint32_t flynn_label = infer(model, x).label_index;
      const std::uint32_t knn_label =
          knn_classify(data, x, spec.k, SimilarityKind::kNegativeEuclidean);
      const bool agree = flynn_label == knn_label;

      const double nn_dist =
          kth_nn_distance(data, x, half_k, SimilarityKind::kNegativeLinf);
      const double delta = fractile_gap_delta(
          x, spec.s, spec.rho, spec.m, spec.fractile_samples_or_auto(),
          synth.seed ^ (t * 0x9E3779B97F4A7C15ULL));
      const bool satisfies =
          nn_dist <= std::min(eta / 2.0, delta / spec.s);

      ++total;
      agree_total += agree;
      if (satisfies) {
        ++satisfying;
        agree_satisfying += agree;
      }
    }
  }

  AgreementResult out;
  out.total_points = total;
  out.satisfying_points = satisfying;
  out.agreement_all =
      total ? static_cast<double>(agree_total) / total : 0.0;
  out.agreement_on_satisfying =
      satisfying ? static_cast<double>(agree_satisfying) / satisfying : 0.0;
  out.precondition_rate =
      total ? static_cast<double>(satisfying) / total : 0.0;
  return out;
}

}  // namespace flynn

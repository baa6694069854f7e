#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <numeric>
#include <vector>

#include "flynn/knn.hpp"
#include "flynn/rng.hpp"
#include "flynn/synth.hpp"

using namespace flynn;

namespace {

Dataset random_dataset(std::size_t n, std::uint32_t d, std::uint32_t classes,
                       std::uint64_t seed) {
  Rng rng(seed);
  Dataset out(d, [&] {
    std::vector<std::string> t(classes);
    for (std::uint32_t l = 0; l < classes; ++l) t[l] = std::to_string(l);
    return t;
  }());
  std::vector<double> x(d);
  for (std::size_t i = 0; i < n; ++i) {
    for (auto& v : x) v = rng.next_normal();
    out.append(x, static_cast<std::uint32_t>(rng.next_below(classes)));
  }
  return out;
}

}  // namespace

TEST_CASE("k=1 returns the label of the most similar point") {
  Dataset data(1, {"a", "b"});
  const double x0 = 0.0, x1 = 10.0;
  data.append({&x0, 1}, 0);
  data.append({&x1, 1}, 1);
  const double query = 2.0;
  REQUIRE(knn_classify(data, {&query, 1}, 1) == 0);
}

TEST_CASE("query equal to a training point returns its label") {
  const Dataset data = random_dataset(30, 4, 3, 50);
  for (std::size_t i = 0; i < data.size(); ++i)
    REQUIRE(knn_classify(data, data.row(i), 1) == data.label(i));
}

TEST_CASE("knn matches exhaustive subset-enumeration oracle") {
  const Dataset data = random_dataset(20, 3, 2, 51);
  Rng rng(52);
  std::vector<double> query(3);
  for (int trial = 0; trial < 25; ++trial) {
    for (auto& v : query) v = rng.next_normal();

    // Oracle: among all 3-subsets, take the one maximizing total similarity
    // (ties by lexicographic index order), then majority vote with ties to
    // the smaller class index.
    double best_sum = -1e300;
    std::array<std::uint32_t, 3> best{};
    for (std::uint32_t a = 0; a < 20; ++a)
      for (std::uint32_t b = a + 1; b < 20; ++b)
        for (std::uint32_t c = b + 1; c < 20; ++c) {
          const double sum =
              similarity(query, data.row(a), SimilarityKind::kNegativeEuclidean) +
              similarity(query, data.row(b), SimilarityKind::kNegativeEuclidean) +
              similarity(query, data.row(c), SimilarityKind::kNegativeEuclidean);
          if (sum > best_sum) {
            best_sum = sum;
            best = {a, b, c};
          }
        }
    std::array<int, 2> votes{};
    for (std::uint32_t i : best) ++votes[data.label(i)];
    const std::uint32_t oracle = votes[1] > votes[0] ? 1 : 0;

    REQUIRE(knn_classify(data, query, 3) == oracle);
  }
}

TEST_CASE("k=n returns the globally most frequent label") {
  const Dataset data = random_dataset(40, 2, 3, 53);
  std::array<int, 3> counts{};
  for (std::size_t i = 0; i < data.size(); ++i) ++counts[data.label(i)];
  const std::uint32_t majority = static_cast<std::uint32_t>(
      std::max_element(counts.begin(), counts.end()) - counts.begin());
  Rng rng(54);
  std::vector<double> query = {rng.next_normal(), rng.next_normal()};
  REQUIRE(knn_classify(data, query, 40) == majority);
}

TEST_CASE("training-set permutation leaves predictions unchanged") {
  const Dataset data = random_dataset(25, 3, 2, 55);
  std::vector<std::uint32_t> perm(25);
  std::iota(perm.begin(), perm.end(), 0u);
  Rng rng(56);
  for (std::size_t i = 25; i > 1; --i)
    std::swap(perm[i - 1], perm[rng.next_below(i)]);
  const Dataset shuffled = data.subset(perm);
  std::vector<double> query(3);
  for (int trial = 0; trial < 30; ++trial) {
    for (auto& v : query) v = rng.next_normal();
    for (std::uint32_t k : {1u, 3u, 7u})
      REQUIRE(knn_classify(data, query, k) == knn_classify(shuffled, query, k));
  }
}

TEST_CASE("k out of range rejected") {
  const Dataset data = random_dataset(5, 2, 2, 57);
  std::vector<double> q = {0.0, 0.0};
  REQUIRE_THROWS_AS(knn_classify(data, q, 0), ConfigError);
  REQUIRE_THROWS_AS(knn_classify(data, q, 6), ConfigError);
}

TEST_CASE("margin of two single-point classes is their Linf distance") {
  Dataset data(2, {"0", "1"});
  const std::vector<double> a = {0.0, 0.0}, b = {1.0, 3.0};
  data.append(a, 0);
  data.append(b, 1);
  REQUIRE(margin(data) == 3.0);
}

TEST_CASE("duplicated point in both classes gives zero margin") {
  Dataset data(2, {"0", "1"});
  const std::vector<double> p = {0.5, -0.5};
  data.append(p, 0);
  data.append(p, 1);
  REQUIRE(margin(data) == 0.0);
}

TEST_CASE("margin matches a double-loop oracle and is symmetric") {
  const Dataset data = random_dataset(50, 4, 2, 58);
  double oracle = 1e300;
  for (std::size_t i = 0; i < data.size(); ++i)
    for (std::size_t j = 0; j < data.size(); ++j) {
      if (data.label(i) == data.label(j)) continue;
      double dist = 0.0;
      for (std::uint32_t c = 0; c < 4; ++c)
        dist = std::max(dist, std::abs(data.row(i)[c] - data.row(j)[c]));
      oracle = std::min(oracle, dist);
    }
  REQUIRE_THAT(margin(data), Catch::Matchers::WithinAbs(oracle, 0.0));

  // swap the class labels
  Dataset swapped(4, data.label_table());
  for (std::size_t i = 0; i < data.size(); ++i)
    swapped.append(data.row(i), 1 - data.label(i));
  REQUIRE(margin(swapped) == margin(data));
}

TEST_CASE("margin rejects non-binary datasets") {
  const Dataset data = random_dataset(10, 2, 3, 59);
  REQUIRE_THROWS_AS(margin(data), DataError);
}

TEST_CASE("kth nn distance: zero for k=1 on a training point") {
  const Dataset data = random_dataset(10, 3, 2, 60);
  REQUIRE(kth_nn_distance(data, data.row(4), 1) == 0.0);
}

TEST_CASE("kth nn distance on collinear points") {
  Dataset data(1, {"0", "1"});
  for (double v : {1.0, 2.0, 3.0}) data.append({&v, 1}, 0);
  const double origin = 0.0;
  REQUIRE(kth_nn_distance(data, {&origin, 1}, 2) == 2.0);
}

TEST_CASE("kth nn distance matches full-sort oracle") {
  const Dataset data = random_dataset(40, 3, 2, 61);
  Rng rng(62);
  std::vector<double> query(3);
  for (int trial = 0; trial < 20; ++trial) {
    for (auto& v : query) v = rng.next_normal();
    std::vector<double> dists;
    for (std::size_t i = 0; i < data.size(); ++i) {
      double d = 0.0;
      for (std::uint32_t c = 0; c < 3; ++c)
        d = std::max(d, std::abs(query[c] - data.row(i)[c]));
      dists.push_back(d);
    }
    std::sort(dists.begin(), dists.end());
    for (std::uint32_t k : {1u, 5u, 17u})
      REQUIRE(kth_nn_distance(data, query, k) == dists[k - 1]);
  }
}

TEST_CASE("cosine similarity ordering") {
  const std::vector<double> a = {1.0, 0.0}, b = {2.0, 0.0}, c = {-1.0, 0.0};
  REQUIRE(similarity(a, b, SimilarityKind::kCosine) ==
          Catch::Approx(1.0));
  REQUIRE(similarity(a, c, SimilarityKind::kCosine) ==
          Catch::Approx(-1.0));
}

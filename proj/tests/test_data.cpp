#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <map>
#include <numeric>
#include <set>
#include <vector>

#include "flynn/csv.hpp"
#include "flynn/dataset.hpp"
#include "flynn/knn.hpp"
#include "flynn/synth.hpp"

using namespace flynn;

namespace {

std::string temp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / name).string();
}

// Least-squares one-vs-rest linear probe, fitted by normal equations with a
// small ridge. Deliberately independent of the classifiers under test.
double linear_probe_accuracy(const Dataset& train, const Dataset& test) {
  const std::uint32_t d = train.dim() + 1;  // bias column
  const std::uint32_t L = train.num_classes();
  std::vector<double> gram(d * d, 0.0);
  std::vector<double> rhs(static_cast<std::size_t>(d) * L, 0.0);
  std::vector<double> xi(d);
  for (std::size_t i = 0; i < train.size(); ++i) {
    const auto row = train.row(i);
    std::copy(row.begin(), row.end(), xi.begin());
    xi[d - 1] = 1.0;
    for (std::uint32_t a = 0; a < d; ++a) {
      for (std::uint32_t b = 0; b < d; ++b) gram[a * d + b] += xi[a] * xi[b];
      for (std::uint32_t l = 0; l < L; ++l)
        rhs[a * L + l] += xi[a] * (train.label(i) == l ? 1.0 : -1.0);
    }
  }
  for (std::uint32_t a = 0; a < d; ++a) gram[a * d + a] += 1e-3;
  // Gaussian elimination on [gram | rhs]
  std::vector<double> weights = rhs;
  for (std::uint32_t col = 0; col < d; ++col) {
    std::uint32_t pivot = col;
    for (std::uint32_t r = col + 1; r < d; ++r)
      if (std::abs(gram[r * d + col]) > std::abs(gram[pivot * d + col]))
        pivot = r;
    for (std::uint32_t c = 0; c < d; ++c)
      std::swap(gram[col * d + c], gram[pivot * d + c]);
    for (std::uint32_t l = 0; l < L; ++l)
      std::swap(weights[col * L + l], weights[pivot * L + l]);
    const double diag = gram[col * d + col];
    for (std::uint32_t r = 0; r < d; ++r) {
      if (r == col) continue;
      const double factor = gram[r * d + col] / diag;
      for (std::uint32_t c = 0; c < d; ++c)
        gram[r * d + c] -= factor * gram[col * d + c];
      for (std::uint32_t l = 0; l < L; ++l)
        weights[r * L + l] -= factor * weights[col * L + l];
    }
  }
  for (std::uint32_t a = 0; a < d; ++a)
    for (std::uint32_t l = 0; l < L; ++l)
      weights[a * L + l] /= gram[a * d + a];

  std::size_t correct = 0;
  for (std::size_t i = 0; i < test.size(); ++i) {
    const auto row = test.row(i);
    std::uint32_t best = 0;
    double best_score = -1e300;
    for (std::uint32_t l = 0; l < L; ++l) {
      double score = weights[(d - 1) * L + l];
      for (std::uint32_t j = 0; j + 1 < d; ++j)
        score += weights[j * L + l] * row[j];
      if (score > best_score) {
        best_score = score;
        best = l;
      }
    }
    correct += best == test.label(i);
  }
  return static_cast<double>(correct) / test.size();
}

}  // namespace

TEST_CASE("huge separation gives perfect 1NN accuracy on held-out draws") {
  SynthSpec spec;
  spec.n = 400;
  spec.d = 8;
  spec.classes = 2;
  spec.clusters_per_class = 1;
  spec.class_sep = 50.0;
  spec.seed = 3;
  const Dataset both = make_classification(spec);
  std::vector<std::uint32_t> head(200), tail(200);
  std::iota(head.begin(), head.end(), 0u);
  std::iota(tail.begin(), tail.end(), 200u);
  const Dataset train = both.subset(head), test = both.subset(tail);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < test.size(); ++i)
    correct += knn_classify(train, test.row(i), 1) == test.label(i);
  REQUIRE(correct == test.size());
}

TEST_CASE("same seed reproduces identical bytes, other seeds differ") {
  SynthSpec spec;
  spec.n = 120;
  spec.d = 10;
  spec.seed = 9;
  const Dataset a = make_classification(spec);
  const Dataset b = make_classification(spec);
  REQUIRE(a.features() == b.features());
  REQUIRE(a.labels() == b.labels());
  spec.seed = 10;
  const Dataset c = make_classification(spec);
  REQUIRE(a.features() != c.features());
}

TEST_CASE("class sizes balanced to within one") {
  SynthSpec spec;
  spec.n = 1003;
  spec.d = 12;
  spec.classes = 5;
  spec.clusters_per_class = 3;
  spec.seed = 12;
  const auto sizes = make_classification(spec).class_sizes();
  const auto [lo, hi] = std::minmax_element(sizes.begin(), sizes.end());
  REQUIRE(*hi - *lo <= 1);
}

TEST_CASE("multi-cluster classes beat a linear probe but suit kNN") {
  SynthSpec spec;
  spec.n = 1000;
  spec.d = 50;
  spec.classes = 5;
  spec.clusters_per_class = 3;
  spec.class_sep = 2.0;
  spec.seed = 77;
  const Dataset data = make_classification(spec);
  const auto folds = kfold(data, 5, 7);
  const Dataset train = data.subset(folds[0].train_indices);
  const Dataset test = data.subset(folds[0].test_indices);

  std::size_t knn_correct = 0;
  for (std::size_t i = 0; i < test.size(); ++i)
    knn_correct += knn_classify(train, test.row(i), 5) == test.label(i);
  const double knn_acc = static_cast<double>(knn_correct) / test.size();
  const double linear_acc = linear_probe_accuracy(train, test);
  INFO("knn=" << knn_acc << " linear=" << linear_acc);
  REQUIRE(knn_acc > linear_acc);
}

TEST_CASE("infeasible center count rejected") {
  SynthSpec spec;
  spec.n = 10;
  spec.d = 2;
  spec.classes = 3;
  spec.clusters_per_class = 2;  // 6 centers > 4 vertices
  REQUIRE_THROWS_AS(make_classification(spec), ConfigError);
}

TEST_CASE("binarize keeps exactly b ones, zero at the minimum for b = d-1") {
  SynthSpec spec;
  spec.n = 60;
  spec.d = 9;
  spec.seed = 5;
  const Dataset data = make_classification(spec);
  const Dataset bin = binarize(data, 8);
  for (std::size_t i = 0; i < bin.size(); ++i) {
    const auto row = bin.row(i);
    const auto original = data.row(i);
    double ones = 0.0;
    std::uint32_t zero_at = 0;
    for (std::uint32_t j = 0; j < 9; ++j) {
      ones += row[j];
      if (row[j] == 0.0) zero_at = j;
    }
    REQUIRE(ones == 8.0);
    REQUIRE(original[zero_at] ==
            *std::min_element(original.begin(), original.end()));
  }
}

TEST_CASE("binarize ranking matches an argsort oracle") {
  SynthSpec spec;
  spec.n = 40;
  spec.d = 15;
  spec.seed = 6;
  const Dataset data = make_classification(spec);
  const std::uint32_t b = 4;
  const Dataset bin = binarize(data, b);
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto x = data.row(i);
    std::vector<std::uint32_t> order(15);
    std::iota(order.begin(), order.end(), 0u);
    std::sort(order.begin(), order.end(), [&](std::uint32_t a, std::uint32_t c) {
      if (x[a] != x[c]) return x[a] > x[c];
      return a < c;
    });
    std::set<std::uint32_t> expect(order.begin(), order.begin() + b);
    for (std::uint32_t j = 0; j < 15; ++j)
      REQUIRE(bin.row(i)[j] == (expect.count(j) ? 1.0 : 0.0));
  }
}

TEST_CASE("binarize range validation") {
  SynthSpec spec;
  spec.n = 5;
  spec.d = 4;
  const Dataset data = make_classification(spec);
  REQUIRE_THROWS_AS(binarize(data, 0), ConfigError);
  REQUIRE_THROWS_AS(binarize(data, 4), ConfigError);
}

TEST_CASE("csv: two-row handwritten file parses exactly") {
  const std::string path = temp_path("flynn_two_rows.csv");
  {
    std::ofstream out(path);
    out << "1.5,-2.25,cat\n0.125,3,dog\n";
  }
  const Dataset data = load_csv(path, 2, false);
  REQUIRE(data.size() == 2);
  REQUIRE(data.dim() == 2);
  REQUIRE(data.label_table() == std::vector<std::string>{"cat", "dog"});
  REQUIRE(data.row(0)[0] == 1.5);
  REQUIRE(data.row(0)[1] == -2.25);
  REQUIRE(data.row(1)[0] == 0.125);
  REQUIRE(data.row(1)[1] == 3.0);
  REQUIRE(data.label(0) == 0);
  REQUIRE(data.label(1) == 1);
}

TEST_CASE("csv: header toggle yields the same matrix") {
  const std::string with_header = temp_path("flynn_hdr.csv");
  const std::string without = temp_path("flynn_nohdr.csv");
  {
    std::ofstream a(with_header), b(without);
    a << "f0,f1,label\n0.5,1,x\n2,3,y\n";
    b << "0.5,1,x\n2,3,y\n";
  }
  const Dataset a = load_csv(with_header, 2, true);
  const Dataset b = load_csv(without, 2, false);
  REQUIRE(a.features() == b.features());
  REQUIRE(a.labels() == b.labels());
}

TEST_CASE("csv: write then read round-trips a generated dataset") {
  SynthSpec spec;
  spec.n = 50;
  spec.d = 7;
  spec.classes = 3;
  spec.seed = 14;
  const Dataset data = make_classification(spec);
  const std::string path = temp_path("flynn_roundtrip.csv");
  save_csv(data, path);
  const Dataset back = load_csv(path, 7, false);
  REQUIRE(back.features() == data.features());
  REQUIRE(back.labels() == data.labels());
  REQUIRE(back.label_table() == data.label_table());
}

TEST_CASE("csv error paths: ragged rows, bad cells, empty file") {
  const std::string ragged = temp_path("flynn_ragged.csv");
  {
    std::ofstream out(ragged);
    out << "1,2,a\n1,2,3,a\n";
  }
  REQUIRE_THROWS_AS(load_csv(ragged, 2, false), DataError);

  const std::string bad = temp_path("flynn_bad.csv");
  {
    std::ofstream out(bad);
    out << "1,zap,a\n";
  }
  REQUIRE_THROWS_AS(load_csv(bad, 2, false), DataError);

  const std::string empty = temp_path("flynn_empty.csv");
  { std::ofstream out(empty); }
  REQUIRE_THROWS_AS(load_csv(empty, 0, false), DataError);
}

TEST_CASE("kfold: folds are disjoint and cover everything") {
  SynthSpec spec;
  spec.n = 103;
  spec.d = 4;
  spec.seed = 20;
  const Dataset data = make_classification(spec);
  const auto folds = kfold(data, 10, 99);
  std::set<std::uint32_t> seen;
  for (const auto& fold : folds) {
    for (std::uint32_t i : fold.test_indices) {
      REQUIRE(seen.insert(i).second);  // each row tested exactly once
    }
    REQUIRE(fold.train_indices.size() + fold.test_indices.size() ==
            data.size());
  }
  REQUIRE(seen.size() == data.size());
}

TEST_CASE("kfold with k = n is leave-one-out") {
  SynthSpec spec;
  spec.n = 12;
  spec.d = 3;
  spec.classes = 2;
  spec.clusters_per_class = 1;
  spec.seed = 21;
  const Dataset data = make_classification(spec);
  const auto folds = kfold(data, 12, 1);
  for (const auto& fold : folds) REQUIRE(fold.test_indices.size() == 1);
}

TEST_CASE("shard: disjoint covering, by-class isolates classes") {
  SynthSpec spec;
  spec.n = 90;
  spec.d = 5;
  spec.classes = 3;
  spec.seed = 22;
  const Dataset data = make_classification(spec);

  for (auto policy : {ShardPolicy::kRoundRobin, ShardPolicy::kByClass}) {
    const auto shards = shard(data, 3, policy);
    std::size_t total = 0;
    for (const auto& piece : shards) total += piece.size();
    REQUIRE(total == data.size());
  }

  const auto by_class = shard(data, 3, ShardPolicy::kByClass);
  for (std::uint32_t t = 0; t < 3; ++t)
    for (std::size_t i = 0; i < by_class[t].size(); ++i)
      REQUIRE(by_class[t].label(i) == t);
}

TEST_CASE("normalized accuracy basics") {
  REQUIRE(normalized_accuracy(0.8, 0.8) == 0.0);
  REQUIRE_THAT(normalized_accuracy(0.84, 0.8),
               Catch::Matchers::WithinAbs(-0.05, 1e-12));
  REQUIRE_THROWS_AS(normalized_accuracy(0.5, 0.0), DataError);
}

TEST_CASE("minmax scaling maps every column into [0,1]") {
  SynthSpec spec;
  spec.n = 30;
  spec.d = 6;
  spec.seed = 23;
  const Dataset scaled = minmax_scale(make_classification(spec));
  for (std::size_t i = 0; i < scaled.size(); ++i)
    for (double v : scaled.row(i)) {
      REQUIRE(v >= 0.0);
      REQUIRE(v <= 1.0);
    }
}

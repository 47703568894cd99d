#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <map>
#include <stdexcept>

#include "commkit/metrics.hpp"
#include "doctest.h"
#include "test_util.hpp"

using namespace commkit;
using testutil::edge_metric_bruteforce;
using testutil::random_graph;
using testutil::random_partition;

namespace {

AttributedGraph four_cycle() {
  return make_graph(4, {{0, 1}, {1, 2}, {2, 3}, {0, 3}}, Tensor(4, 1), std::nullopt);
}

}  // namespace

TEST_CASE("edge_sets") {
  AttributedGraph g = four_cycle();
  SUBCASE("all same label: no inter edges") {
    EdgeSets s = edge_sets(g, {0, 0, 0, 0});
    CHECK(s.inter.empty());
    CHECK(s.intra.size() == 4);
  }
  SUBCASE("all distinct labels: no intra edges") {
    EdgeSets s = edge_sets(g, {0, 1, 2, 3});
    CHECK(s.intra.empty());
    CHECK(s.inter.size() == 4);
  }
  SUBCASE("4-cycle split") {
    EdgeSets s = edge_sets(g, {0, 0, 1, 1});
    REQUIRE(s.intra.size() == 2);
    CHECK(s.intra[0] == std::make_pair(std::uint32_t{0}, std::uint32_t{1}));
    CHECK(s.intra[1] == std::make_pair(std::uint32_t{2}, std::uint32_t{3}));
    REQUIRE(s.inter.size() == 2);
    CHECK(s.inter[0] == std::make_pair(std::uint32_t{0}, std::uint32_t{3}));
    CHECK(s.inter[1] == std::make_pair(std::uint32_t{1}, std::uint32_t{2}));
  }
}

TEST_CASE("edge_metric") {
  AttributedGraph g = four_cycle();
  SUBCASE("singleton partition scores zero") {
    CHECK(edge_metric(g, {0, 1, 2, 3}, {0, 0, 1, 1}) == 0.0);
  }
  SUBCASE("perfect match scores one") {
    CHECK(edge_metric(g, {0, 0, 1, 1}, {0, 0, 1, 1}) == 1.0);
    CHECK(edge_metric(g, {7, 7, 2, 2}, {0, 0, 1, 1}) == 1.0);  // ids are irrelevant
  }
  SUBCASE("4-cycle with one misassigned node gives 1/3") {
    CHECK(edge_metric(g, {0, 0, 0, 1}, {0, 0, 1, 1}) == doctest::Approx(1.0 / 3.0));
    CHECK(edge_metric(g, {0, 0, 0, 1}, {0, 0, 1, 1}) ==
          edge_metric_bruteforce(g, {0, 0, 0, 1}, {0, 0, 1, 1}));
  }
  SUBCASE("matches the brute-force oracle exactly on 200 random instances") {
    Rng rng(41);
    int done = 0;
    while (done < 200) {
      const std::size_t n = 3 + rng.uniform_int(10);  // up to 12 nodes
      AttributedGraph h = random_graph(n, 0.2 + 0.6 * rng.uniform(), 2, rng);
      if (h.n_edges() == 0) continue;
      std::vector<int> truth = random_partition(n, 1 + rng.uniform_int(n), rng);
      std::vector<int> pred = random_partition(n, 1 + rng.uniform_int(n), rng);
      const double lib = edge_metric(h, pred, truth);
      const double ref = edge_metric_bruteforce(h, pred, truth);
      REQUIRE(lib == ref);  // exact equality, same rational arithmetic
      ++done;
    }
  }
  SUBCASE("invariant to relabeling either side") {
    Rng rng(43);
    AttributedGraph h = random_graph(10, 0.4, 2, rng);
    std::vector<int> truth = random_partition(10, 3, rng);
    std::vector<int> pred = random_partition(10, 4, rng);
    std::vector<int> pred2 = pred;
    for (int& v : pred2) v = 100 - v;
    std::vector<int> truth2 = truth;
    for (int& v : truth2) v = v * 7 + 3;
    CHECK(edge_metric(h, pred, truth) == edge_metric(h, pred2, truth));
    CHECK(edge_metric(h, pred, truth) == edge_metric(h, pred, truth2));
  }
}

TEST_CASE("modularity") {
  SUBCASE("single community is zero") {
    AttributedGraph g = four_cycle();
    CHECK(modularity(g, {0, 0, 0, 0}) == doctest::Approx(0.0));
  }
  SUBCASE("two disjoint triangles score 1/2") {
    AttributedGraph g = make_graph(6, {{0, 1}, {1, 2}, {0, 2}, {3, 4}, {4, 5}, {3, 5}},
                                   Tensor(6, 1), std::nullopt);
    CHECK(modularity(g, {0, 0, 0, 1, 1, 1}) == doctest::Approx(0.5));
  }
  SUBCASE("bounded by [-1/2, 1] on random partitions") {
    Rng rng(47);
    for (int t = 0; t < 50; ++t) {
      AttributedGraph g = random_graph(12, 0.4, 2, rng);
      if (g.n_edges() == 0) continue;
      std::vector<int> labels = random_partition(12, 1 + rng.uniform_int(12), rng);
      const double q = modularity(g, labels);
      CHECK(q >= -0.5);
      CHECK(q <= 1.0);
    }
  }
  SUBCASE("empty edge set is an error") {
    AttributedGraph g = make_graph(3, {}, Tensor(3, 1), std::nullopt);
    CHECK_THROWS_AS(modularity(g, {0, 1, 2}), std::invalid_argument);
  }
}

TEST_CASE("calinski_harabasz") {
  SUBCASE("two 1-D clusters {0,1} and {4,5} score 32") {
    Tensor x = Tensor::from_rows({{0}, {1}, {4}, {5}});
    CHECK(calinski_harabasz(x, {0, 0, 1, 1}) == doctest::Approx(32.0));
  }
  SUBCASE("random labels on iid data hover near 1") {
    Rng rng(53);
    double sum = 0.0;
    const int trials = 50;
    for (int t = 0; t < trials; ++t) {
      Tensor x(40, 3);
      for (std::size_t i = 0; i < x.size(); ++i) x.at_flat(i) = rng.normal();
      std::vector<int> labels = random_partition(40, 4, rng);
      std::map<int, int> distinct;
      for (int v : labels) ++distinct[v];
      if (distinct.size() < 2) {
        --t;
        continue;
      }
      sum += calinski_harabasz(x, labels);
    }
    const double mean = sum / trials;
    CHECK(mean > 0.5);
    CHECK(mean < 2.0);
  }
  SUBCASE("fewer than two clusters is an error") {
    Tensor x = Tensor::from_rows({{0}, {1}});
    CHECK_THROWS_AS(calinski_harabasz(x, {3, 3}), std::invalid_argument);
  }
  SUBCASE("zero within-dispersion returns the +inf sentinel") {
    Tensor x = Tensor::from_rows({{0}, {0}, {5}, {5}});
    CHECK(std::isinf(calinski_harabasz(x, {0, 0, 1, 1})));
  }
}

TEST_CASE("nmi") {
  SUBCASE("identical partitions") { CHECK(nmi({0, 1, 1, 2}, {0, 1, 1, 2}) == doctest::Approx(1.0)); }
  SUBCASE("label-permuted copy") { CHECK(nmi({0, 1, 1, 2}, {5, 3, 3, 0}) == doctest::Approx(1.0)); }
  SUBCASE("independent partitions") { CHECK(nmi({0, 0, 1, 1}, {0, 1, 0, 1}) == doctest::Approx(0.0)); }
  SUBCASE("both constant gives 1, one constant gives 0") {
    CHECK(nmi({3, 3, 3}, {1, 1, 1}) == 1.0);
    CHECK(nmi({0, 0, 0}, {0, 1, 2}) == 0.0);
  }
  SUBCASE("stays inside [0,1]") {
    Rng rng(59);
    for (int t = 0; t < 50; ++t) {
      std::vector<int> a = random_partition(15, 1 + rng.uniform_int(15), rng);
      std::vector<int> b = random_partition(15, 1 + rng.uniform_int(15), rng);
      const double v = nmi(a, b);
      CHECK(v >= 0.0);
      CHECK(v <= 1.0);
    }
  }
}

TEST_CASE("report formatting") {
  PartitionScores s;
  s.k = 5;
  s.modularity = 0.5;
  s.calinski_harabasz = 12.0;
  std::string unsup = format_report(s);
  CHECK(unsup.find("K=5\n") != std::string::npos);
  CHECK(unsup.find("modularity=0.5\n") != std::string::npos);
  CHECK(unsup.find("semantic=12\n") != std::string::npos);
  CHECK(unsup.find("nmi=") == std::string::npos);
  s.has_supervised = true;
  s.nmi = 1.0;
  s.edge = 0.25;
  std::string sup = format_report(s);
  CHECK(sup.find("nmi=1\n") != std::string::npos);
  CHECK(sup.find("edge=0.25\n") != std::string::npos);
}

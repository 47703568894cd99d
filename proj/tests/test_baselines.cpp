#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <queue>
#include <stdexcept>

#include "commkit/lpa.hpp"
#include "doctest.h"
#include "test_util.hpp"

using namespace commkit;
using testutil::random_graph;

namespace {

std::vector<int> components(const AttributedGraph& g) {
  std::vector<int> comp(g.n_nodes, -1);
  int next = 0;
  for (std::size_t s = 0; s < g.n_nodes; ++s) {
    if (comp[s] >= 0) continue;
    comp[s] = next;
    std::queue<std::uint32_t> q;
    q.push(static_cast<std::uint32_t>(s));
    while (!q.empty()) {
      std::uint32_t u = q.front();
      q.pop();
      for (std::size_t e = g.adj_ptr[u]; e < g.adj_ptr[u + 1]; ++e)
        if (comp[g.adj[e]] < 0) {
          comp[g.adj[e]] = next;
          q.push(g.adj[e]);
        }
    }
    ++next;
  }
  return comp;
}

}  // namespace

TEST_CASE("label_propagation") {
  SUBCASE("edgeless graph keeps singleton communities") {
    AttributedGraph g = make_graph(5, {}, Tensor(5, 1), std::nullopt);
    std::vector<int> labels = label_propagation(g, 1);
    CHECK(labels == std::vector<int>{0, 1, 2, 3, 4});
  }
  SUBCASE("two disjoint triangles collapse to their components") {
    AttributedGraph g = make_graph(6, {{0, 1}, {1, 2}, {0, 2}, {3, 4}, {4, 5}, {3, 5}},
                                   Tensor(6, 1), std::nullopt);
    std::vector<int> labels = label_propagation(g, 2);
    CHECK(labels[0] == labels[1]);
    CHECK(labels[1] == labels[2]);
    CHECK(labels[3] == labels[4]);
    CHECK(labels[4] == labels[5]);
    CHECK(labels[0] != labels[3]);
  }
  SUBCASE("deterministic per seed") {
    Rng rng(3);
    AttributedGraph g = random_graph(30, 0.2, 2, rng);
    CHECK(label_propagation(g, 7) == label_propagation(g, 7));
  }
  SUBCASE("labels are compacted to 0..K-1") {
    Rng rng(5);
    AttributedGraph g = random_graph(20, 0.15, 2, rng);
    std::vector<int> labels = label_propagation(g, 11);
    int max_label = 0;
    std::vector<char> seen(labels.size(), 0);
    for (int v : labels) {
      REQUIRE(v >= 0);
      seen[v] = 1;
      max_label = std::max(max_label, v);
    }
    for (int c = 0; c <= max_label; ++c) CHECK(seen[c] == 1);
  }
  SUBCASE("no community ever spans two connected components") {
    Rng rng(9);
    for (int t = 0; t < 20; ++t) {
      AttributedGraph g = random_graph(25, 0.08, 2, rng);
      std::vector<int> comp = components(g);
      std::vector<int> labels = label_propagation(g, 100 + t);
      std::map<int, int> label_comp;
      for (std::size_t i = 0; i < g.n_nodes; ++i) {
        auto [it, inserted] = label_comp.emplace(labels[i], comp[i]);
        CHECK(it->second == comp[i]);
      }
    }
  }
  SUBCASE("max_iter must be positive") {
    AttributedGraph g = make_graph(2, {{0, 1}}, Tensor(2, 1), std::nullopt);
    CHECK_THROWS_AS(label_propagation(g, 1, 0), std::invalid_argument);
  }
}

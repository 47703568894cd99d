#include "commkit/lpa.hpp"

#include <map>
#include <stdexcept>

namespace commkit {

std::vector<int> label_propagation(const AttributedGraph& g, std::uint64_t seed, int max_iter) {
  if (max_iter < 1) throw std::invalid_argument("label_propagation: max_iter must be >= 1");
  Rng rng(seed);
  const std::size_t n = g.n_nodes;
  std::vector<int> labels(n);
  for (std::size_t i = 0; i < n; ++i) labels[i] = static_cast<int>(i);

  std::vector<std::uint32_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = static_cast<std::uint32_t>(i);

  for (int iter = 0; iter < max_iter; ++iter) {
    rng.shuffle(order);
    bool changed = false;
    for (std::uint32_t v : order) {
      if (g.degree(v) == 0) continue;
      std::map<int, std::size_t> counts;
      for (std::size_t e = g.adj_ptr[v]; e < g.adj_ptr[v + 1]; ++e) ++counts[labels[g.adj[e]]];
      std::size_t best = 0;
      for (const auto& [lab, cnt] : counts) best = std::max(best, cnt);
      std::vector<int> top;
      for (const auto& [lab, cnt] : counts)
        if (cnt == best) top.push_back(lab);
      const int pick = top[rng.uniform_int(top.size())];
      if (pick != labels[v]) {
        labels[v] = pick;
        changed = true;
      }
    }
    if (!changed) break;
  }

  // compact to 0..K-1 by first appearance
  std::map<int, int> remap;
  std::vector<int> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    auto [it, inserted] = remap.emplace(labels[i], static_cast<int>(remap.size()));
    out[i] = it->second;
  }
  return out;
}

}  // namespace commkit

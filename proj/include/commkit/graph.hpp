#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "commkit/rng.hpp"
#include "commkit/sparse.hpp"
#include "commkit/tensor.hpp"

namespace commkit {

// Undirected, unweighted node-attributed graph. Edges are canonical (u < v),
// sorted and deduplicated; self-loops are never stored.
struct AttributedGraph {
  std::size_t n_nodes = 0;
  std::size_t n_features = 0;
  std::vector<std::pair<std::uint32_t, std::uint32_t>> edges;
  std::vector<std::size_t> adj_ptr;  // CSR neighbor lists, both directions
  std::vector<std::uint32_t> adj;
  Tensor attributes;  // N x D
  std::optional<std::vector<int>> labels;

  std::size_t n_edges() const { return edges.size(); }
  std::size_t degree(std::size_t v) const { return adj_ptr[v + 1] - adj_ptr[v]; }
  bool has_edge(std::uint32_t u, std::uint32_t v) const;
  void rebuild_adjacency();
};

// Row-stochastic (A + I) with strictly positive diagonal.
struct NormalizedAdjacency {
  SparseMatrix mat;
};

struct PlantedSpec {
  std::size_t n_nodes = 0;
  std::size_t k_true = 2;
  double p_in = 0.0;
  double p_out = 0.0;
  std::size_t attr_dim = 1;
  double attr_separation = 0.0;  // pairwise distance between cluster means, in noise sigmas
  std::uint64_t seed = 0;
  void validate() const;
};

// Canonicalizes edges (drops self-loops, merges duplicates/reversals) and
// builds adjacency. Attribute row count fixes N when larger than 1 + max id.
AttributedGraph make_graph(std::size_t n_nodes,
                           std::vector<std::pair<std::uint32_t, std::uint32_t>> edges,
                           Tensor attributes, std::optional<std::vector<int>> labels);

AttributedGraph load_graph(const std::string& edge_path, const std::string& attr_path,
                           const std::string& label_path = {});
void save_graph(const AttributedGraph& g, const std::string& edge_path,
                const std::string& attr_path, const std::string& label_path = {});

NormalizedAdjacency normalize_adjacency(const AttributedGraph& g);

AttributedGraph generate_planted_graph(const PlantedSpec& spec);

// round(fraction * n) distinct indices, uniform without replacement.
std::vector<std::uint32_t> sample_mask_set(std::size_t n, double fraction, Rng& rng);

// Explicit opt-in transform: scales each attribute row to unit L1 norm
// (rows with zero norm are left unchanged).
void row_normalize_attributes(AttributedGraph& g);

}  // namespace commkit

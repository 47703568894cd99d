#pragma once

#include <cstdint>
#include <vector>

#include "commkit/autodiff.hpp"
#include "commkit/graph.hpp"

namespace commkit {

struct LossWeights {
  double alpha = 1e-2;
  double beta = 5e-3;
};

struct Triplet {
  std::uint32_t i, j, u;  // (i,j) is an edge, (i,u) is not, u != i
};

struct TripletBatch {
  std::vector<Triplet> triplets;
  std::size_t skipped = 0;  // edges whose negative draw hit the attempt cap
};

// One triplet per undirected edge. The edge is oriented (i,j) or (j,i) with
// probability 1/2; u is drawn uniformly and redrawn while (i,u) is an edge or
// u == i, capped at 100 attempts (the triplet is then skipped and counted).
TripletBatch sample_negatives(const AttributedGraph& g, Rng& rng);

// Mean over masked nodes of (1 - cos(x_i, z_i))^3. Both norms are guarded
// with +1e-12; when the guard fires, *zero_norm_seen is set.
ad::Var sce_loss(ad::Tape& tape, const Tensor& x, ad::Var z,
                 const std::vector<std::uint32_t>& mask_set, bool* zero_norm_seen = nullptr);

// -sum ln sigmoid(C_i.C_j - C_i.C_u); optionally divided by the edge count.
ad::Var bpr_loss(ad::Var c, const TripletBatch& batch, bool mean_over_edges = false,
                 std::size_t n_edges = 0);

// Sum of column L2 norms of W (zero column -> zero subgradient).
ad::Var group_sparsity_loss(ad::Var w);

ad::Var total_loss(ad::Var sce, ad::Var bpr, ad::Var gs, const LossWeights& weights);

// Value-only conveniences.
double sce_loss_value(const Tensor& x, const Tensor& z, const std::vector<std::uint32_t>& mask_set);
double bpr_loss_value(const Tensor& c, const TripletBatch& batch);
double group_sparsity_value(const Tensor& w);

}  // namespace commkit

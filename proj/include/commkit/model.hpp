#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "commkit/autodiff.hpp"
#include "commkit/graph.hpp"
#include "commkit/params.hpp"

namespace commkit {

// N x K_max nonnegative community-affiliation matrix; row argmax assigns
// each node to a community.
using AffiliationMatrix = Tensor;

struct ModelConfig {
  std::size_t attr_dim = 0;
  std::size_t hidden_dim = 64;
  std::size_t n_heads = 4;
  std::size_t readout_hidden = 0;  // 0 = hidden_dim
  std::size_t k_max = 32;
  double dropout = 0.2;            // input-layer dropout, training only
  double negative_slope = 0.2;     // attention nonlinearity

  std::size_t readout_hidden_dim() const { return readout_hidden ? readout_hidden : hidden_dim; }
  void validate() const;
};

struct AttentionLayerParams {
  std::size_t n_heads = 1;
  bool concat_heads = true;
  double negative_slope = 0.2;
  std::vector<std::size_t> weight;    // per head, in_dim x out_per_head
  std::vector<std::size_t> attn_src;  // per head, out_per_head x 1
  std::vector<std::size_t> attn_dst;  // per head, out_per_head x 1
  std::size_t bias = 0;               // 1 x out_total
};

struct MaskTokens {
  std::size_t encoder_token = 0;  // 1 x D
  std::size_t decoder_token = 0;  // 1 x D'
};

struct ReadoutParams {
  std::size_t w1 = 0;  // D' x readout_hidden
  std::size_t w = 0;   // readout_hidden x K_max
};

struct ModelParameters {
  ModelConfig config;
  ParameterStore store;
  MaskTokens tokens;
  std::array<AttentionLayerParams, 2> encoder;
  std::array<AttentionLayerParams, 2> decoder;
  ReadoutParams readout;
};

ModelParameters init_model(const ModelConfig& config, Rng& rng);

// Incoming-neighbor lists with self-loops, neighbors ascending per segment.
struct GraphTopology {
  std::size_t n = 0;
  std::vector<std::size_t> seg_ptr;   // n + 1
  std::vector<std::uint32_t> center;  // aggregating node, segment-major
  std::vector<std::uint32_t> neigh;
};
GraphTopology build_topology(const AttributedGraph& g);

struct ModelGraph {
  GraphTopology topo;
  NormalizedAdjacency nadj;
  Tensor attributes;
};
ModelGraph build_model_graph(const AttributedGraph& g);

enum class Mode { kTrain, kEval };

// One forward pass over a tape. Binds every parameter as a leaf on
// construction so gradients can be read back per store index.
class ModelForward {
public:
  ModelForward(ad::Tape& tape, const ModelGraph& mg, const ModelParameters& params, Mode mode,
               Rng* dropout_rng = nullptr);

  ad::Var mask_attributes(const std::vector<std::uint32_t>& mask_set);
  ad::Var encode(ad::Var x_tilde);
  ad::Var remask(ad::Var h, const std::vector<std::uint32_t>& mask_set);
  ad::Var decode(ad::Var h_tilde);
  ad::Var readout(ad::Var h);

  ad::Var param(std::size_t index) const { return bound_[index]; }
  ad::Var attributes() const { return x_; }

private:
  ad::Var attention_layer(ad::Var x, const AttentionLayerParams& layer);

  ad::Tape& tape_;
  const ModelGraph& mg_;
  const ModelParameters& params_;
  Mode mode_;
  Rng* dropout_rng_;
  std::vector<ad::Var> bound_;
  ad::Var x_;
};

// Plain-value helpers.
Tensor mask_attributes(const Tensor& x, const std::vector<std::uint32_t>& mask_set,
                       const Tensor& token);
AffiliationMatrix readout_affiliation(const NormalizedAdjacency& nadj, const Tensor& h,
                                      const Tensor& w1, const Tensor& w);
double edge_probability(const AffiliationMatrix& c, std::size_t i, std::size_t j);
std::vector<int> assign_communities(const AffiliationMatrix& c);
int count_communities(const std::vector<int>& partition, std::size_t k_max);

}  // namespace commkit

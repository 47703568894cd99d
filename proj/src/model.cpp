#include "commkit/model.hpp"

#include <cmath>
#include <stdexcept>

namespace commkit {

namespace {

Tensor uniform_fan_in(std::size_t rows, std::size_t cols, Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(rows));
  Tensor t(rows, cols);
  for (std::size_t i = 0; i < t.size(); ++i) t.at_flat(i) = (2.0 * rng.uniform() - 1.0) * bound;
  return t;
}

Tensor gaussian(std::size_t rows, std::size_t cols, double stddev, Rng& rng) {
  Tensor t(rows, cols);
  for (std::size_t i = 0; i < t.size(); ++i) t.at_flat(i) = stddev * rng.normal();
  return t;
}

AttentionLayerParams make_attention_layer(ParameterStore& store, const std::string& prefix,
                                          std::size_t in_dim, std::size_t out_per_head,
                                          std::size_t n_heads, bool concat, double negative_slope,
                                          Rng& rng) {
  AttentionLayerParams layer;
  layer.n_heads = n_heads;
  layer.concat_heads = concat;
  layer.negative_slope = negative_slope;
  for (std::size_t h = 0; h < n_heads; ++h) {
    const std::string hp = prefix + ".h" + std::to_string(h);
    layer.weight.push_back(store.add(hp + ".weight", uniform_fan_in(in_dim, out_per_head, rng)));
    layer.attn_src.push_back(store.add(hp + ".attn_src", uniform_fan_in(out_per_head, 1, rng)));
    layer.attn_dst.push_back(store.add(hp + ".attn_dst", uniform_fan_in(out_per_head, 1, rng)));
  }
  const std::size_t out_total = concat ? n_heads * out_per_head : out_per_head;
  layer.bias = store.add(prefix + ".bias", Tensor(1, out_total));
  return layer;
}

}  // namespace

void ModelConfig::validate() const {
  if (attr_dim == 0) throw std::invalid_argument("model config: attr_dim must be positive");
  if (k_max < 2) throw std::invalid_argument("model config: k_max must be >= 2");
  if (n_heads == 0) throw std::invalid_argument("model config: n_heads must be positive");
  if (hidden_dim % n_heads != 0)
    throw std::invalid_argument("model config: hidden_dim must be divisible by n_heads");
  if (dropout < 0.0 || dropout >= 1.0)
    throw std::invalid_argument("model config: dropout must be in [0,1)");
}

ModelParameters init_model(const ModelConfig& config, Rng& rng) {
  config.validate();
  ModelParameters p;
  p.config = config;
  const std::size_t d = config.attr_dim;
  const std::size_t hidden = config.hidden_dim;
  const std::size_t heads = config.n_heads;
  const std::size_t per_head = hidden / heads;
  const double slope = config.negative_slope;

  p.encoder[0] = make_attention_layer(p.store, "encoder.l1", d, per_head, heads, true, slope, rng);
  p.encoder[1] = make_attention_layer(p.store, "encoder.l2", hidden, hidden, heads, false, slope, rng);
  p.decoder[0] = make_attention_layer(p.store, "decoder.l1", hidden, per_head, heads, true, slope, rng);
  p.decoder[1] = make_attention_layer(p.store, "decoder.l2", hidden, d, heads, false, slope, rng);

  p.tokens.encoder_token = p.store.add("mask.encoder_token", gaussian(1, d, 0.02, rng));
  p.tokens.decoder_token = p.store.add("mask.decoder_token", gaussian(1, hidden, 0.02, rng));

  const std::size_t rh = config.readout_hidden_dim();
  p.readout.w1 = p.store.add("readout.w1", uniform_fan_in(hidden, rh, rng));
  p.readout.w = p.store.add("readout.w", uniform_fan_in(rh, config.k_max, rng));
  return p;
}

GraphTopology build_topology(const AttributedGraph& g) {
  GraphTopology t;
  t.n = g.n_nodes;
  t.seg_ptr.resize(g.n_nodes + 1);
  t.center.reserve(g.adj.size() + g.n_nodes);
  t.neigh.reserve(g.adj.size() + g.n_nodes);
  t.seg_ptr[0] = 0;
  for (std::size_t i = 0; i < g.n_nodes; ++i) {
    bool self_done = false;
    for (std::size_t e = g.adj_ptr[i]; e < g.adj_ptr[i + 1]; ++e) {
      const std::uint32_t j = g.adj[e];
      if (!self_done && j > i) {
        t.center.push_back(static_cast<std::uint32_t>(i));
        t.neigh.push_back(static_cast<std::uint32_t>(i));
        self_done = true;
      }
      t.center.push_back(static_cast<std::uint32_t>(i));
      t.neigh.push_back(j);
    }
    if (!self_done) {
      t.center.push_back(static_cast<std::uint32_t>(i));
      t.neigh.push_back(static_cast<std::uint32_t>(i));
    }
    t.seg_ptr[i + 1] = t.center.size();
  }
  return t;
}

ModelGraph build_model_graph(const AttributedGraph& g) {
  return ModelGraph{build_topology(g), normalize_adjacency(g), g.attributes};
}

ModelForward::ModelForward(ad::Tape& tape, const ModelGraph& mg, const ModelParameters& params,
                           Mode mode, Rng* dropout_rng)
    : tape_(tape), mg_(mg), params_(params), mode_(mode), dropout_rng_(dropout_rng) {
  bound_.reserve(params.store.count());
  for (std::size_t i = 0; i < params.store.count(); ++i)
    bound_.push_back(tape_.leaf(params.store.value(i), /*requires_grad=*/true));
  x_ = tape_.leaf(mg.attributes, /*requires_grad=*/false);
}

ad::Var ModelForward::mask_attributes(const std::vector<std::uint32_t>& mask_set) {
  return ad::row_replace(x_, mask_set, bound_[params_.tokens.encoder_token]);
}

ad::Var ModelForward::attention_layer(ad::Var x, const AttentionLayerParams& layer) {
  std::vector<ad::Var> heads;
  heads.reserve(layer.n_heads);
  for (std::size_t h = 0; h < layer.n_heads; ++h) {
    ad::Var proj = ad::matmul(x, bound_[layer.weight[h]]);
    ad::Var score_src = ad::matmul(proj, bound_[layer.attn_src[h]]);  // N x 1
    ad::Var score_dst = ad::matmul(proj, bound_[layer.attn_dst[h]]);
    ad::Var logits = ad::leaky_relu(
        ad::add(ad::gather_rows(score_src, mg_.topo.center), ad::gather_rows(score_dst, mg_.topo.neigh)),
        layer.negative_slope);
    ad::Var attn = ad::segment_softmax(logits, mg_.topo.seg_ptr);
    ad::Var messages = ad::mul_rowscalar(ad::gather_rows(proj, mg_.topo.neigh), attn);
    heads.push_back(ad::segment_sum(messages, mg_.topo.seg_ptr));
  }
  ad::Var out = layer.concat_heads ? ad::concat_cols(heads) : ad::average(heads);
  return ad::add_rowvec(out, bound_[layer.bias]);
}

ad::Var ModelForward::encode(ad::Var x_tilde) {
  ad::Var in = x_tilde;
  if (mode_ == Mode::kTrain && params_.config.dropout > 0.0) {
    if (dropout_rng_ == nullptr) throw std::logic_error("encode: training mode needs a dropout rng");
    in = ad::dropout(in, params_.config.dropout, *dropout_rng_, /*training=*/true);
  }
  ad::Var h1 = ad::relu(attention_layer(in, params_.encoder[0]));
  return attention_layer(h1, params_.encoder[1]);
}

ad::Var ModelForward::remask(ad::Var h, const std::vector<std::uint32_t>& mask_set) {
  return ad::row_replace(h, mask_set, bound_[params_.tokens.decoder_token]);
}

ad::Var ModelForward::decode(ad::Var h_tilde) {
  ad::Var h1 = ad::relu(attention_layer(h_tilde, params_.decoder[0]));
  return attention_layer(h1, params_.decoder[1]);  // raw reconstruction, no output nonlinearity
}

ad::Var ModelForward::readout(ad::Var h) {
  ad::Var hc = ad::relu(ad::spmm(mg_.nadj.mat, ad::matmul(h, bound_[params_.readout.w1])));
  return ad::relu(ad::spmm(mg_.nadj.mat, ad::matmul(hc, bound_[params_.readout.w])));
}

Tensor mask_attributes(const Tensor& x, const std::vector<std::uint32_t>& mask_set,
                       const Tensor& token) {
  if (token.rows() != 1 || token.cols() != x.cols())
    throw std::invalid_argument("mask_attributes: token must be 1 x D");
  Tensor out = x;
  for (std::uint32_t r : mask_set) {
    if (r >= x.rows()) throw std::out_of_range("mask_attributes: index out of range");
    for (std::size_t j = 0; j < x.cols(); ++j) out(r, j) = token(0, j);
  }
  return out;
}

AffiliationMatrix readout_affiliation(const NormalizedAdjacency& nadj, const Tensor& h,
                                      const Tensor& w1, const Tensor& w) {
  ad::Tape tape;
  ad::Var hv = tape.leaf(h);
  ad::Var hc = ad::relu(ad::spmm(nadj.mat, ad::matmul(hv, tape.leaf(w1))));
  ad::Var c = ad::relu(ad::spmm(nadj.mat, ad::matmul(hc, tape.leaf(w))));
  return c.value();
}

double edge_probability(const AffiliationMatrix& c, std::size_t i, std::size_t j) {
  if (i >= c.rows() || j >= c.rows()) throw std::out_of_range("edge_probability: index out of range");
  double dot = 0.0;
  for (std::size_t k = 0; k < c.cols(); ++k) dot += c(i, k) * c(j, k);
  return ad::sigmoid_scalar(dot);
}

std::vector<int> assign_communities(const AffiliationMatrix& c) {
  std::vector<int> out(c.rows(), 0);
  for (std::size_t i = 0; i < c.rows(); ++i) {
    std::size_t best = 0;
    for (std::size_t j = 1; j < c.cols(); ++j)
      if (c(i, j) > c(i, best)) best = j;  // ties resolve to the lowest index
    out[i] = static_cast<int>(best);
  }
  return out;
}

int count_communities(const std::vector<int>& partition, std::size_t k_max) {
  std::vector<char> seen(k_max, 0);
  int k = 0;
  for (int c : partition) {
    if (c < 0 || static_cast<std::size_t>(c) >= k_max)
      throw std::out_of_range("count_communities: community id outside [0, K_max)");
    if (!seen[c]) {
      seen[c] = 1;
      ++k;
    }
  }
  return k;
}

}  // namespace commkit

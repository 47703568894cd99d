#include "commkit/train.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>
#include <stdexcept>

namespace commkit {

namespace {

std::string full_precision(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

void TrainConfig::validate() const {
  if (!(mask_fraction > 0.0 && mask_fraction <= 1.0))
    throw std::invalid_argument("train config: mask_fraction must be in (0,1]");
  if (eval_every < 1) throw std::invalid_argument("train config: eval_every must be >= 1");
  if (max_epochs < 1) throw std::invalid_argument("train config: max_epochs must be >= 1");
  if (alpha < 0.0 || beta < 0.0)
    throw std::invalid_argument("train config: alpha and beta must be nonnegative");
  if (lr <= 0.0) throw std::invalid_argument("train config: lr must be positive");
}

ModelConfig TrainConfig::model_config(std::size_t attr_dim) const {
  ModelConfig mc;
  mc.attr_dim = attr_dim;
  mc.hidden_dim = hidden_dim;
  mc.n_heads = n_heads;
  mc.readout_hidden = readout_hidden;
  mc.k_max = k_max;
  mc.dropout = dropout;
  return mc;
}

TrainState init_train_state(const AttributedGraph& g, const TrainConfig& cfg) {
  cfg.validate();
  TrainState st{ModelParameters{}, AdamState{}, Rng(cfg.seed), 0, false, 0, {}};
  st.params = init_model(cfg.model_config(g.n_features), st.rng);
  st.adam.lr = cfg.lr;
  st.adam.weight_decay = cfg.weight_decay;
  init_adam(st.adam, st.params.store);
  return st;
}

EpochLosses train_epoch(TrainState& st, const AttributedGraph& g, const ModelGraph& mg,
                        const TrainConfig& cfg) {
  st.epoch += 1;

  std::vector<std::uint32_t> mask_set;
  std::vector<std::uint32_t> loss_set;  // nodes entering the reconstruction loss
  if (cfg.masking) {
    mask_set = sample_mask_set(g.n_nodes, cfg.mask_fraction, st.rng);
    loss_set = mask_set;
  } else {
    loss_set.resize(g.n_nodes);
    for (std::size_t i = 0; i < g.n_nodes; ++i) loss_set[i] = static_cast<std::uint32_t>(i);
  }
  TripletBatch batch = sample_negatives(g, st.rng);
  st.negatives_skipped += batch.skipped;

  ad::Tape tape;
  ModelForward fw(tape, mg, st.params, Mode::kTrain, &st.rng);

  ad::Var x_tilde = cfg.masking ? fw.mask_attributes(mask_set) : fw.attributes();
  ad::Var h = fw.encode(x_tilde);
  ad::Var h_tilde = cfg.masking ? fw.remask(h, mask_set) : h;
  ad::Var z = fw.decode(h_tilde);
  ad::Var sce = sce_loss(tape, mg.attributes, z, loss_set, &st.zero_norm_seen);

  ad::Var c = fw.readout(h);
  ad::Var bpr = bpr_loss(c, batch, cfg.bpr_mean, g.n_edges());
  ad::Var gs = group_sparsity_loss(fw.param(st.params.readout.w));

  EpochLosses out;
  out.sce = sce.value().item();
  out.bpr = bpr.value().item();
  out.gs = gs.value().item();
  const char* names[3] = {"SCE", "BPR", "GS"};
  const double vals[3] = {out.sce, out.bpr, out.gs};
  for (int t = 0; t < 3; ++t)
    if (!std::isfinite(vals[t]))
      throw std::runtime_error("train_epoch: non-finite " + std::string(names[t]) +
                               " loss at epoch " + std::to_string(st.epoch));
  ad::Var total = total_loss(sce, bpr, gs, LossWeights{cfg.alpha, cfg.beta});
  out.total = total.value().item();
  if (!std::isfinite(out.total))
    throw std::runtime_error("train_epoch: non-finite total loss at epoch " +
                             std::to_string(st.epoch));

  tape.backward(total);
  std::vector<Tensor> grads;
  grads.reserve(st.params.store.count());
  for (std::size_t i = 0; i < st.params.store.count(); ++i)
    grads.push_back(tape.grad_value(fw.param(i)));
  out.step_skipped = !adam_step(st.params.store, grads, st.adam);
  return out;
}

PartitionScores evaluate_partition(const AttributedGraph& g, const std::vector<int>& partition) {
  PartitionScores s;
  std::map<int, std::size_t> seen;
  for (int c : partition) ++seen[c];
  s.k = static_cast<int>(seen.size());
  s.modularity = g.n_edges() > 0 ? modularity(g, partition)
                                 : std::numeric_limits<double>::quiet_NaN();
  if (s.k >= 2) {
    s.calinski_harabasz = calinski_harabasz(g.attributes, partition);
    s.product = s.modularity * s.calinski_harabasz;
    s.valid = std::isfinite(s.product);
  } else {
    s.calinski_harabasz = std::numeric_limits<double>::quiet_NaN();
    s.product = std::numeric_limits<double>::quiet_NaN();
    s.valid = false;
  }
  return s;
}

PartitionScores score_against_truth(const AttributedGraph& g, const std::vector<int>& partition,
                                    const std::vector<int>& truth, PartitionScores scores) {
  scores.nmi = nmi(partition, truth);
  scores.edge = edge_metric(g, partition, truth);
  scores.has_supervised = true;
  return scores;
}

EvalOutput evaluate_model(const AttributedGraph& g, const ModelGraph& mg,
                          const ModelParameters& params) {
  ad::Tape tape;
  ModelForward fw(tape, mg, params, Mode::kEval);
  ad::Var h = fw.encode(fw.attributes());
  ad::Var c = fw.readout(h);
  EvalOutput out;
  out.affiliation = c.value();
  out.partition = assign_communities(out.affiliation);
  out.scores = evaluate_partition(g, out.partition);
  return out;
}

FitResult fit(const AttributedGraph& g, const TrainConfig& cfg) {
  cfg.validate();
  ModelGraph mg = build_model_graph(g);
  TrainState st = init_train_state(g, cfg);

  FitResult result;
  int best_index = -1;
  for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    result.losses.push_back(train_epoch(st, g, mg, cfg));
    if (epoch % cfg.eval_every != 0) continue;

    EvalOutput eval = evaluate_model(g, mg, st.params);
    Checkpoint ck;
    ck.epoch = epoch;
    ck.partition = std::move(eval.partition);
    ck.scores = eval.scores;
    const bool better =
        ck.scores.valid && (best_index < 0 || !result.best.scores.valid ||
                            ck.scores.product > result.best.scores.product);
    if (better) {
      result.best = ck;
      result.best.parameters = snapshot(st.params.store);
      best_index = static_cast<int>(result.history.size());
    }
    result.history.push_back(std::move(ck));  // history entries carry no parameter copy
  }
  if (best_index < 0 && !result.history.empty()) {
    // no valid checkpoint (K < 2 throughout); fall back to the earliest one
    result.best = result.history.front();
    result.best.parameters = snapshot(st.params.store);
  }
  result.zero_norm_seen = st.zero_norm_seen;
  result.negatives_skipped = st.negatives_skipped;
  result.any_valid = best_index >= 0;
  st.history = result.history;
  return result;
}

void write_history(const std::string& path, const std::vector<Checkpoint>& history) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot write history " + path);
  for (const Checkpoint& ck : history) {
    f << ck.epoch << '\t' << ck.scores.k << '\t' << full_precision(ck.scores.modularity) << '\t'
      << full_precision(ck.scores.calinski_harabasz) << '\t' << full_precision(ck.scores.product)
      << '\n';
  }
  if (!f.flush()) throw std::runtime_error("write failed for " + path);
}

void write_partition(const std::string& path, const std::vector<int>& partition) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot write partition " + path);
  for (std::size_t i = 0; i < partition.size(); ++i) f << i << ' ' << partition[i] << '\n';
  if (!f.flush()) throw std::runtime_error("write failed for " + path);
}

std::vector<int> read_partition(const std::string& path, std::size_t n_nodes) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open partition " + path);
  std::vector<int> out(n_nodes, -1);
  std::string line;
  std::size_t line_no = 0, filled = 0;
  bool single_column = false;
  std::vector<int> plain;
  while (std::getline(f, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::istringstream ss(line);
    long a = 0, b = 0;
    if (!(ss >> a)) continue;  // blank line
    if (ss >> b) {
      if (a < 0 || static_cast<std::size_t>(a) >= n_nodes)
        throw std::runtime_error(path + ":" + std::to_string(line_no) + ": node id out of range");
      out[static_cast<std::size_t>(a)] = static_cast<int>(b);
      ++filled;
    } else {
      single_column = true;  // label-per-line format, node id = line order
      plain.push_back(static_cast<int>(a));
    }
  }
  if (single_column) {
    if (filled > 0) throw std::runtime_error(path + ": mixed partition formats");
    if (plain.size() != n_nodes)
      throw std::runtime_error(path + ": partition length (" + std::to_string(plain.size()) +
                               ") does not match node count (" + std::to_string(n_nodes) + ")");
    return plain;
  }
  if (filled != n_nodes)
    throw std::runtime_error(path + ": partition length (" + std::to_string(filled) +
                             ") does not match node count (" + std::to_string(n_nodes) + ")");
  return out;
}

}  // namespace commkit

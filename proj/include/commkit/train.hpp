#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "commkit/adam.hpp"
#include "commkit/losses.hpp"
#include "commkit/metrics.hpp"
#include "commkit/model.hpp"
#include "commkit/serialize.hpp"

namespace commkit {

struct TrainConfig {
  double mask_fraction = 0.5;
  int max_epochs = 500;
  int eval_every = 50;
  double lr = 1e-3;
  double weight_decay = 0.0;
  double alpha = 1e-2;
  double beta = 5e-3;
  std::size_t k_max = 32;
  std::size_t hidden_dim = 64;
  std::size_t n_heads = 4;
  std::size_t readout_hidden = 0;  // 0 = hidden_dim
  double dropout = 0.2;
  bool bpr_mean = false;   // divide the BPR sum by |E|
  bool masking = true;     // off: reconstruct clean attributes over all nodes
  std::uint64_t seed = 0;

  void validate() const;
  ModelConfig model_config(std::size_t attr_dim) const;
};

struct EpochLosses {
  double sce = 0.0, bpr = 0.0, gs = 0.0, total = 0.0;
  bool step_skipped = false;
};

struct Checkpoint {
  int epoch = 0;
  std::vector<NamedTensor> parameters;  // populated for the selected checkpoint
  std::vector<int> partition;
  PartitionScores scores;
};

struct TrainState {
  ModelParameters params;
  AdamState adam;
  Rng rng;
  int epoch = 0;
  bool zero_norm_seen = false;
  std::size_t negatives_skipped = 0;
  std::vector<Checkpoint> history;
};

TrainState init_train_state(const AttributedGraph& g, const TrainConfig& cfg);

// One epoch: mask -> encode -> (remask -> decode -> SCE) and (readout -> BPR
// over fresh negatives), plus the group-sparsity term on the final readout
// weight; a single Adam step on the weighted total.
EpochLosses train_epoch(TrainState& st, const AttributedGraph& g, const ModelGraph& mg,
                        const TrainConfig& cfg);

// Unsupervised scores of a partition; the selection product is flagged
// invalid when K < 2 or non-finite.
PartitionScores evaluate_partition(const AttributedGraph& g, const std::vector<int>& partition);

// Adds NMI and the edge-agreement score against a reference partition.
PartitionScores score_against_truth(const AttributedGraph& g, const std::vector<int>& partition,
                                    const std::vector<int>& truth, PartitionScores scores);

struct EvalOutput {
  AffiliationMatrix affiliation;
  std::vector<int> partition;
  PartitionScores scores;
};

// Forward pass with masking and dropout disabled; bit-identical on repeats.
EvalOutput evaluate_model(const AttributedGraph& g, const ModelGraph& mg,
                          const ModelParameters& params);

struct FitResult {
  Checkpoint best;
  std::vector<Checkpoint> history;
  std::vector<EpochLosses> losses;
  bool zero_norm_seen = false;
  std::size_t negatives_skipped = 0;
  bool any_valid = false;
};

FitResult fit(const AttributedGraph& g, const TrainConfig& cfg);

// one line per checkpoint: epoch K modularity ch product (tab-separated)
void write_history(const std::string& path, const std::vector<Checkpoint>& history);
// one line per node: node_id community_id
void write_partition(const std::string& path, const std::vector<int>& partition);
std::vector<int> read_partition(const std::string& path, std::size_t n_nodes);

}  // namespace commkit

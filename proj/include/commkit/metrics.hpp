#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "commkit/graph.hpp"
#include "commkit/tensor.hpp"

namespace commkit {

// Graph edges split by whether the two endpoints share a label.
// intra and inter partition the edge set; keys are canonical (min, max).
struct EdgeSets {
  std::vector<std::pair<std::uint32_t, std::uint32_t>> intra, inter;
};

EdgeSets edge_sets(const AttributedGraph& g, const std::vector<int>& labels);

// Harmonic mean of the Jaccard agreements between predicted and reference
// intra-/inter-community edge sets. An empty union counts as agreement 1;
// both Jaccards zero gives 0.
double edge_metric(const AttributedGraph& g, const std::vector<int>& predicted,
                   const std::vector<int>& truth);

// Newman modularity of a partition. Requires at least one edge.
double modularity(const AttributedGraph& g, const std::vector<int>& labels);

// Between/within dispersion ratio. Requires K >= 2; returns +inf when the
// within-cluster dispersion is zero.
double calinski_harabasz(const Tensor& x, const std::vector<int>& labels);

// Mutual information normalized by the arithmetic mean of the entropies.
// Two constant partitions give 1; exactly one constant gives 0.
double nmi(const std::vector<int>& a, const std::vector<int>& b);

struct PartitionScores {
  int k = 0;
  double modularity = 0.0;
  double calinski_harabasz = 0.0;
  double product = 0.0;  // checkpoint-selection score
  bool valid = false;    // false when K < 2 or the product is non-finite
  double nmi = 0.0;
  double edge = 0.0;
  bool has_supervised = false;
};

// key=value report lines (K, modularity, semantic, and nmi/edge when present).
std::string format_report(const PartitionScores& scores);

}  // namespace commkit

#pragma once

#include <cstdint>
#include <vector>

#include "commkit/graph.hpp"

namespace commkit {

// Asynchronous label propagation with a seeded node order and seeded tie
// breaks. Stops when a full sweep changes nothing or after max_iter sweeps.
// Output labels are compacted to 0..K-1 by first appearance in node order.
std::vector<int> label_propagation(const AttributedGraph& g, std::uint64_t seed, int max_iter = 100);

}  // namespace commkit

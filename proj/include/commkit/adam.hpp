#pragma once

#include <vector>

#include "commkit/params.hpp"
#include "commkit/tensor.hpp"

namespace commkit {

// Adam with bias correction and decoupled weight decay (applied as an extra
// -lr*wd*theta term, outside the moment estimates).
struct AdamState {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double weight_decay = 0.0;
  long step = 0;
  std::vector<Tensor> m, v;
};

void init_adam(AdamState& state, const ParameterStore& params);

// Applies one update in place. Returns false (and leaves params, moments and
// the step counter untouched) when any gradient entry is non-finite.
bool adam_step(ParameterStore& params, const std::vector<Tensor>& grads, AdamState& state);

}  // namespace commkit

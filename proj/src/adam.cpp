#include "commkit/adam.hpp"

#include <cmath>
#include <stdexcept>

namespace commkit {

void init_adam(AdamState& state, const ParameterStore& params) {
  state.step = 0;
  state.m.clear();
  state.v.clear();
  for (std::size_t i = 0; i < params.count(); ++i) {
    const Tensor& p = params.value(i);
    state.m.emplace_back(p.rows(), p.cols());
    state.v.emplace_back(p.rows(), p.cols());
  }
}

bool adam_step(ParameterStore& params, const std::vector<Tensor>& grads, AdamState& state) {
  if (grads.size() != params.count() || state.m.size() != params.count())
    throw std::invalid_argument("adam_step: parameter/gradient/state count mismatch");
  for (std::size_t i = 0; i < params.count(); ++i) {
    if (!params.value(i).same_shape(grads[i]))
      throw std::invalid_argument("adam_step: gradient shape mismatch at " + std::to_string(i));
    if (!grads[i].all_finite()) return false;
  }

  state.step += 1;
  const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
  for (std::size_t i = 0; i < params.count(); ++i) {
    Tensor& p = params.value(i);
    Tensor& m = state.m[i];
    Tensor& v = state.v[i];
    const Tensor& g = grads[i];
    for (std::size_t k = 0; k < p.size(); ++k) {
      const double gk = g.at_flat(k);
      m.at_flat(k) = state.beta1 * m.at_flat(k) + (1.0 - state.beta1) * gk;
      v.at_flat(k) = state.beta2 * v.at_flat(k) + (1.0 - state.beta2) * gk * gk;
      const double mhat = m.at_flat(k) / bc1;
      const double vhat = v.at_flat(k) / bc2;
      p.at_flat(k) -= state.lr * mhat / (std::sqrt(vhat) + state.epsilon);
      p.at_flat(k) -= state.lr * state.weight_decay * p.at_flat(k);
    }
  }
  return true;
}

}  // namespace commkit

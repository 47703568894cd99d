#pragma once

#include <functional>
#include <vector>

#include "commkit/rng.hpp"
#include "commkit/tensor.hpp"

namespace commkit {

// Central-difference check of analytic gradients. loss_fn must read the
// current contents of the given parameter tensors and be deterministic
// (dropout, masking and negative sampling frozen); determinism is verified
// with a repeated probe evaluation before any perturbation.
//
// Returns max over checked coordinates of |analytic - numeric| / max(1e-8, |numeric|).
// With max_coords > 0 and more total coordinates than that, a random subsample
// of max_coords coordinates is checked (callers should keep it >= 200).
double finite_difference_check(const std::function<double()>& loss_fn,
                               const std::vector<Tensor*>& params,
                               const std::vector<Tensor>& analytic_grads, double eps,
                               std::size_t max_coords = 0, Rng* subsample_rng = nullptr);

}  // namespace commkit

#include "commkit/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <stdexcept>
#include <utility>

namespace commkit {

double finite_difference_check(const std::function<double()>& loss_fn,
                               const std::vector<Tensor*>& params,
                               const std::vector<Tensor>& analytic_grads, double eps,
                               std::size_t max_coords, Rng* subsample_rng) {
  if (params.size() != analytic_grads.size())
    throw std::invalid_argument("finite_difference_check: params/grads count mismatch");
  for (std::size_t p = 0; p < params.size(); ++p)
    if (!params[p]->same_shape(analytic_grads[p]))
      throw std::invalid_argument("finite_difference_check: gradient shape mismatch");

  const double probe_a = loss_fn();
  const double probe_b = loss_fn();
  if (std::memcmp(&probe_a, &probe_b, sizeof(double)) != 0)
    throw std::runtime_error("finite_difference_check: loss_fn is not deterministic");

  std::vector<std::pair<std::size_t, std::size_t>> coords;
  for (std::size_t p = 0; p < params.size(); ++p)
    for (std::size_t k = 0; k < params[p]->size(); ++k) coords.emplace_back(p, k);

  if (max_coords > 0 && coords.size() > max_coords) {
    if (subsample_rng == nullptr)
      throw std::invalid_argument("finite_difference_check: subsampling requires an rng");
    for (std::size_t i = 0; i < max_coords; ++i) {
      std::size_t j = i + static_cast<std::size_t>(subsample_rng->uniform_int(coords.size() - i));
      std::swap(coords[i], coords[j]);
    }
    coords.resize(max_coords);
  }

  double max_rel = 0.0;
  for (auto [p, k] : coords) {
    double& theta = params[p]->at_flat(k);
    const double saved = theta;
    theta = saved + eps;
    const double fp = loss_fn();
    theta = saved - eps;
    const double fm = loss_fn();
    theta = saved;
    const double numeric = (fp - fm) / (2.0 * eps);
    const double analytic = analytic_grads[p].at_flat(k);
    const double rel = std::fabs(analytic - numeric) / std::max(1e-8, std::fabs(numeric));
    max_rel = std::max(max_rel, rel);
  }
  return max_rel;
}

}  // namespace commkit

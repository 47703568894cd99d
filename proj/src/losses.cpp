#include "commkit/losses.hpp"

#include <cmath>
#include <stdexcept>

namespace commkit {

namespace {
constexpr double kNormGuard = 1e-12;
}

TripletBatch sample_negatives(const AttributedGraph& g, Rng& rng) {
  const std::size_t n = g.n_nodes;
  if (n >= 2 && g.n_edges() == n * (n - 1) / 2)
    throw std::runtime_error("sample_negatives: graph is complete, no negative edges exist");
  TripletBatch batch;
  batch.triplets.reserve(g.n_edges());
  for (auto [a, b] : g.edges) {
    std::uint32_t i = a, j = b;
    if (rng.uniform() < 0.5) std::swap(i, j);
    bool found = false;
    for (int attempt = 0; attempt < 100; ++attempt) {
      const auto u = static_cast<std::uint32_t>(rng.uniform_int(n));
      if (u == i || g.has_edge(i, u)) continue;
      batch.triplets.push_back(Triplet{i, j, u});
      found = true;
      break;
    }
    if (!found) ++batch.skipped;
  }
  return batch;
}

ad::Var sce_loss(ad::Tape& tape, const Tensor& x, ad::Var z,
                 const std::vector<std::uint32_t>& mask_set, bool* zero_norm_seen) {
  if (mask_set.empty()) throw std::invalid_argument("sce_loss: mask set must be nonempty");
  const Tensor& zv = z.value();
  if (!zv.same_shape(x)) throw std::invalid_argument("sce_loss: X and Z shapes differ");

  // constant side: masked rows of X and their guarded inverse norms
  Tensor x_masked(mask_set.size(), x.cols());
  Tensor x_norm(mask_set.size(), 1);
  bool guard_fired = false;
  for (std::size_t r = 0; r < mask_set.size(); ++r) {
    const std::uint32_t i = mask_set[r];
    if (i >= x.rows()) throw std::out_of_range("sce_loss: mask index out of range");
    double ss = 0.0;
    for (std::size_t j = 0; j < x.cols(); ++j) {
      x_masked(r, j) = x(i, j);
      ss += x(i, j) * x(i, j);
    }
    const double norm = std::sqrt(ss);
    if (norm == 0.0) guard_fired = true;
    x_norm(r, 0) = norm + kNormGuard;
  }

  ad::Var zm = ad::gather_rows(z, mask_set);
  ad::Var xm = tape.leaf(std::move(x_masked));
  ad::Var dot = ad::row_sum(ad::mul(zm, xm));
  ad::Var z_norm = ad::add_const(ad::sqrt_elem(ad::row_sum(ad::mul(zm, zm))), kNormGuard);
  for (std::size_t r = 0; r < mask_set.size(); ++r)
    if (z_norm.value()(r, 0) <= 2.0 * kNormGuard) guard_fired = true;
  if (guard_fired && zero_norm_seen != nullptr) *zero_norm_seen = true;

  ad::Var denom = ad::mul(z_norm, tape.leaf(x_norm));
  ad::Var one_minus_cos = ad::add_const(ad::scale(ad::divide(dot, denom), -1.0), 1.0);
  ad::Var cubed = ad::mul(ad::mul(one_minus_cos, one_minus_cos), one_minus_cos);
  return ad::mean_all(cubed);
}

ad::Var bpr_loss(ad::Var c, const TripletBatch& batch, bool mean_over_edges, std::size_t n_edges) {
  const Tensor& cv = c.value();
  std::vector<std::uint32_t> is, js, us;
  is.reserve(batch.triplets.size());
  js.reserve(batch.triplets.size());
  us.reserve(batch.triplets.size());
  for (const Triplet& t : batch.triplets) {
    if (t.i >= cv.rows() || t.j >= cv.rows() || t.u >= cv.rows())
      throw std::out_of_range("bpr_loss: triplet index out of range");
    is.push_back(t.i);
    js.push_back(t.j);
    us.push_back(t.u);
  }
  ad::Var ci = ad::gather_rows(c, std::move(is));
  ad::Var cj = ad::gather_rows(c, std::move(js));
  ad::Var cu = ad::gather_rows(c, std::move(us));
  ad::Var margin = ad::sub(ad::row_sum(ad::mul(ci, cj)), ad::row_sum(ad::mul(ci, cu)));
  // -ln sigmoid(m) == softplus(-m), stable on both branches
  ad::Var loss = ad::sum_all(ad::softplus(ad::scale(margin, -1.0)));
  if (mean_over_edges) {
    if (n_edges == 0) throw std::invalid_argument("bpr_loss: mean form needs the edge count");
    loss = ad::scale(loss, 1.0 / static_cast<double>(n_edges));
  }
  return loss;
}

ad::Var group_sparsity_loss(ad::Var w) { return ad::l21_colnorm_sum(w); }

ad::Var total_loss(ad::Var sce, ad::Var bpr, ad::Var gs, const LossWeights& weights) {
  const char* names[3] = {"SCE", "BPR", "GS"};
  const ad::Var terms[3] = {sce, bpr, gs};
  for (int t = 0; t < 3; ++t)
    if (!std::isfinite(terms[t].value().item()))
      throw std::runtime_error(std::string("total_loss: non-finite ") + names[t] + " component");
  return ad::add(sce, ad::add(ad::scale(bpr, weights.alpha), ad::scale(gs, weights.beta)));
}

double sce_loss_value(const Tensor& x, const Tensor& z, const std::vector<std::uint32_t>& mask_set) {
  ad::Tape tape;
  return sce_loss(tape, x, tape.leaf(z), mask_set).value().item();
}

double bpr_loss_value(const Tensor& c, const TripletBatch& batch) {
  ad::Tape tape;
  return bpr_loss(tape.leaf(c), batch).value().item();
}

double group_sparsity_value(const Tensor& w) {
  ad::Tape tape;
  return group_sparsity_loss(tape.leaf(w)).value().item();
}

}  // namespace commkit

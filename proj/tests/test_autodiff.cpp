#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <functional>
#include <limits>
#include <stdexcept>

#include "commkit/adam.hpp"
#include "commkit/autodiff.hpp"
#include "commkit/gradcheck.hpp"
#include "doctest.h"
#include "test_util.hpp"

using namespace commkit;
using testutil::random_tensor;

namespace {

// FD-checks a scalar built from `params` by `build`. All leaves get grads.
double check_op(const std::function<ad::Var(ad::Tape&, std::vector<ad::Var>&)>& build,
                std::vector<Tensor> params, double eps = 1e-5) {
  auto loss_at = [&]() {
    ad::Tape tape;
    std::vector<ad::Var> leaves;
    for (const Tensor& p : params) leaves.push_back(tape.leaf(p, true));
    return build(tape, leaves).value().item();
  };
  ad::Tape tape;
  std::vector<ad::Var> leaves;
  for (const Tensor& p : params) leaves.push_back(tape.leaf(p, true));
  ad::Var out = build(tape, leaves);
  tape.backward(out);
  std::vector<Tensor> grads;
  for (ad::Var v : leaves) grads.push_back(tape.grad_value(v));
  std::vector<Tensor*> ptrs;
  for (Tensor& p : params) ptrs.push_back(&p);
  return finite_difference_check(loss_at, ptrs, grads, eps);
}

SparseMatrix random_sparse(std::size_t n, double density, Rng& rng) {
  SparseMatrix s;
  s.n_rows = s.n_cols = n;
  s.row_ptr.push_back(0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j)
      if (rng.uniform() < density) {
        s.col.push_back(static_cast<std::uint32_t>(j));
        s.val.push_back(2.0 * rng.uniform() - 1.0);
      }
    s.row_ptr.push_back(s.col.size());
  }
  return s;
}

}  // namespace

TEST_CASE("matmul basics") {
  ad::Tape tape;
  Tensor eye = Tensor::from_rows({{1, 0}, {0, 1}});
  Tensor m = Tensor::from_rows({{3, -2}, {7, 0.5}});
  CHECK(bitwise_equal(ad::matmul(tape.leaf(eye), tape.leaf(m)).value(), m));

  Tensor zero(2, 2);
  CHECK(bitwise_equal(ad::matmul(tape.leaf(zero), tape.leaf(m)).value(), zero));

  Tensor a = Tensor::from_rows({{1, 2}, {3, 4}});
  Tensor b = Tensor::from_rows({{5}, {6}});
  Tensor prod = ad::matmul(tape.leaf(a), tape.leaf(b)).value();
  CHECK(prod(0, 0) == doctest::Approx(17.0));
  CHECK(prod(1, 0) == doctest::Approx(39.0));

  Tensor bad(3, 3);
  CHECK_THROWS_AS(ad::matmul(tape.leaf(a), tape.leaf(bad)), std::invalid_argument);
}

TEST_CASE("spmm equals dense product") {
  Rng rng(11);
  SparseMatrix s = random_sparse(8, 0.4, rng);
  Tensor d = random_tensor(8, 5, rng);
  ad::Tape tape;
  Tensor via_sparse = ad::spmm(s, tape.leaf(d)).value();
  Tensor via_dense = ad::matmul(tape.leaf(s.to_dense()), tape.leaf(d)).value();
  CHECK(max_abs_diff(via_sparse, via_dense) < 1e-12);

  SparseMatrix eye = SparseMatrix::identity(8);
  CHECK(bitwise_equal(ad::spmm(eye, tape.leaf(d)).value(), d));

  SparseMatrix zero;
  zero.n_rows = zero.n_cols = 8;
  zero.row_ptr.assign(9, 0);
  CHECK(bitwise_equal(ad::spmm(zero, tape.leaf(d)).value(), Tensor(8, 5)));
}

TEST_CASE("spmm backward equals dense backward") {
  Rng rng(12);
  SparseMatrix s = random_sparse(8, 0.4, rng);
  Tensor d = random_tensor(8, 4, rng);

  ad::Tape t1;
  ad::Var d1 = t1.leaf(d, true);
  t1.backward(ad::mean_all(ad::spmm(s, d1)));

  ad::Tape t2;
  ad::Var d2 = t2.leaf(d, true);
  t2.backward(ad::mean_all(ad::matmul(t2.leaf(s.to_dense()), d2)));

  CHECK(max_abs_diff(t1.grad_value(d1), t2.grad_value(d2)) < 1e-12);
}

TEST_CASE("finite differences pass for every op") {
  Rng rng(23);
  const double tol = 1e-4;

  SUBCASE("matmul") {
    CHECK(check_op([](ad::Tape&, std::vector<ad::Var>& v) {
            return ad::mean_all(ad::matmul(v[0], v[1]));
          },
          {random_tensor(4, 3, rng), random_tensor(3, 5, rng)}) < tol);
  }
  SUBCASE("spmm") {
    SparseMatrix s = random_sparse(6, 0.5, rng);
    CHECK(check_op([s](ad::Tape&, std::vector<ad::Var>& v) {
            return ad::mean_all(ad::mul(ad::spmm(s, v[0]), ad::spmm(s, v[0])));
          },
          {random_tensor(6, 3, rng)}) < tol);
  }
  SUBCASE("elementwise binary") {
    Tensor a = random_tensor(4, 4, rng), b = random_tensor(4, 4, rng, 0.5);
    for (std::size_t i = 0; i < b.size(); ++i) b.at_flat(i) += b.at_flat(i) >= 0 ? 1.0 : -1.0;
    CHECK(check_op([](ad::Tape&, std::vector<ad::Var>& v) {
            return ad::mean_all(ad::divide(ad::mul(ad::add(v[0], v[1]), ad::sub(v[0], v[1])), v[1]));
          },
          {a, b}) < tol);
  }
  SUBCASE("add_rowvec and scale") {
    CHECK(check_op([](ad::Tape&, std::vector<ad::Var>& v) {
            return ad::mean_all(ad::scale(ad::add_rowvec(v[0], v[1]), 1.7));
          },
          {random_tensor(5, 3, rng), random_tensor(1, 3, rng)}) < tol);
  }
  SUBCASE("activations") {
    CHECK(check_op([](ad::Tape&, std::vector<ad::Var>& v) {
            return ad::mean_all(ad::sigmoid(ad::leaky_relu(v[0], 0.2)));
          },
          {random_tensor(4, 4, rng)}) < tol);
    CHECK(check_op([](ad::Tape&, std::vector<ad::Var>& v) {
            return ad::mean_all(ad::softplus(v[0]));
          },
          {random_tensor(4, 4, rng, 3.0)}) < tol);
    Tensor pos = random_tensor(4, 4, rng);
    for (std::size_t i = 0; i < pos.size(); ++i) pos.at_flat(i) = 0.5 + std::fabs(pos.at_flat(i));
    CHECK(check_op([](ad::Tape&, std::vector<ad::Var>& v) {
            return ad::mean_all(ad::sqrt_elem(v[0]));
          },
          {pos}) < tol);
  }
  SUBCASE("gather/segment ops") {
    std::vector<std::uint32_t> idx = {0, 2, 2, 4, 1, 3, 3};
    std::vector<std::size_t> seg = {0, 2, 4, 7};
    CHECK(check_op([idx, seg](ad::Tape&, std::vector<ad::Var>& v) {
            ad::Var rows = ad::gather_rows(v[0], idx);
            ad::Var logits = ad::row_sum(rows);
            ad::Var attn = ad::segment_softmax(logits, seg);
            return ad::mean_all(ad::segment_sum(ad::mul_rowscalar(rows, attn), seg));
          },
          {random_tensor(5, 3, rng)}) < tol);
  }
  SUBCASE("concat and average") {
    CHECK(check_op([](ad::Tape&, std::vector<ad::Var>& v) {
            ad::Var cat = ad::concat_cols({v[0], v[1]});
            return ad::mean_all(ad::mul(cat, cat));
          },
          {random_tensor(3, 2, rng), random_tensor(3, 4, rng)}) < tol);
    CHECK(check_op([](ad::Tape&, std::vector<ad::Var>& v) {
            ad::Var avg = ad::average({v[0], v[1], v[2]});
            return ad::mean_all(ad::mul(avg, avg));
          },
          {random_tensor(3, 3, rng), random_tensor(3, 3, rng), random_tensor(3, 3, rng)}) < tol);
  }
  SUBCASE("row_replace") {
    CHECK(check_op([](ad::Tape&, std::vector<ad::Var>& v) {
            ad::Var replaced = ad::row_replace(v[0], {1, 3}, v[1]);
            return ad::mean_all(ad::mul(replaced, replaced));
          },
          {random_tensor(5, 3, rng), random_tensor(1, 3, rng)}) < tol);
  }
  SUBCASE("l21 column norms") {
    CHECK(check_op([](ad::Tape&, std::vector<ad::Var>& v) {
            return ad::l21_colnorm_sum(v[0]);
          },
          {random_tensor(5, 4, rng)}) < tol);
  }
}

TEST_CASE("dropout: rate 0 and eval mode are the identity") {
  Rng rng(5);
  Tensor x = random_tensor(6, 4, rng);
  ad::Tape tape;
  ad::Var v = tape.leaf(x, true);
  CHECK(ad::dropout(v, 0.0, rng, true).id == v.id);
  CHECK(ad::dropout(v, 0.5, rng, false).id == v.id);

  ad::Var dropped = ad::dropout(v, 0.5, rng, true);
  const Tensor& dv = dropped.value();
  for (std::size_t i = 0; i < dv.size(); ++i) {
    const double r = dv.at_flat(i) / x.at_flat(i);
    CHECK((std::fabs(r) < 1e-12 || std::fabs(r - 2.0) < 1e-12));
  }
}

TEST_CASE("adam") {
  SUBCASE("zero gradient leaves parameters unchanged") {
    ParameterStore store;
    Rng rng(3);
    store.add("w", random_tensor(3, 3, rng));
    Tensor before = store.value(0);
    AdamState state;
    init_adam(state, store);
    CHECK(adam_step(store, {Tensor(3, 3)}, state));
    CHECK(bitwise_equal(store.value(0), before));
  }
  SUBCASE("first step from zero moves by about -lr") {
    ParameterStore store;
    store.add("w", Tensor(1, 1));
    AdamState state;
    state.lr = 0.001;
    init_adam(state, store);
    Tensor g = Tensor::scalar(0.5);
    CHECK(adam_step(store, {g}, state));
    CHECK(std::fabs(store.value(0).item() + 0.001) < 1e-9);
  }
  SUBCASE("identical calls produce identical outputs") {
    Rng rng(9);
    Tensor init = random_tensor(4, 2, rng);
    Tensor g = random_tensor(4, 2, rng);
    auto run = [&]() {
      ParameterStore store;
      store.add("w", init);
      AdamState state;
      init_adam(state, store);
      adam_step(store, {g}, state);
      adam_step(store, {g}, state);
      return store.value(0);
    };
    CHECK(bitwise_equal(run(), run()));
  }
  SUBCASE("non-finite gradient skips the step") {
    ParameterStore store;
    store.add("w", Tensor::scalar(1.0));
    AdamState state;
    init_adam(state, store);
    Tensor g = Tensor::scalar(std::numeric_limits<double>::quiet_NaN());
    CHECK_FALSE(adam_step(store, {g}, state));
    CHECK(store.value(0).item() == 1.0);
    CHECK(state.step == 0);
  }
  SUBCASE("decoupled weight decay pulls toward zero") {
    ParameterStore store;
    store.add("w", Tensor::scalar(2.0));
    AdamState state;
    state.lr = 0.1;
    state.weight_decay = 0.5;
    init_adam(state, store);
    CHECK(adam_step(store, {Tensor(1, 1)}, state));
    CHECK(store.value(0).item() == doctest::Approx(2.0 * (1.0 - 0.1 * 0.5)));
  }
}

TEST_CASE("finite_difference_check itself") {
  SUBCASE("quadratic") {
    Tensor x = Tensor::scalar(3.0);
    Tensor grad = Tensor::scalar(6.0);
    auto f = [&]() { return x.item() * x.item(); };
    CHECK(finite_difference_check(f, {&x}, {grad}, 1e-5) < 1e-6);
  }
  SUBCASE("constant function has zero error") {
    Tensor x = Tensor::scalar(1.5);
    Tensor grad = Tensor::scalar(0.0);
    auto f = [&]() { return 42.0; };
    CHECK(finite_difference_check(f, {&x}, {grad}, 1e-5) == 0.0);
  }
  SUBCASE("non-deterministic loss is rejected") {
    Tensor x = Tensor::scalar(1.0);
    Tensor grad = Tensor::scalar(0.0);
    int calls = 0;
    auto f = [&]() { return static_cast<double>(++calls); };
    CHECK_THROWS_AS(finite_difference_check(f, {&x}, {grad}, 1e-5), std::runtime_error);
  }
  SUBCASE("coordinate subsampling") {
    Rng rng(7);
    Tensor x = testutil::random_tensor(20, 20, rng);
    Tensor grad(20, 20);
    for (std::size_t i = 0; i < x.size(); ++i) grad.at_flat(i) = 2.0 * x.at_flat(i);
    auto f = [&]() {
      double s = 0.0;
      for (std::size_t i = 0; i < x.size(); ++i) s += x.at_flat(i) * x.at_flat(i);
      return s;
    };
    Rng sub(1);
    CHECK(finite_difference_check(f, {&x}, {grad}, 1e-5, 200, &sub) < 1e-4);
  }
}

TEST_CASE("rng streams are reproducible") {
  Rng a(42), b(42);
  for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());
  Rng c(42);
  std::vector<int> v1(10), v2(10);
  for (int i = 0; i < 10; ++i) v1[i] = v2[i] = i;
  Rng d(42);
  c.shuffle(v1);
  d.shuffle(v2);
  CHECK(v1 == v2);
}

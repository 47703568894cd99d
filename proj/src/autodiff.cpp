#include "commkit/autodiff.hpp"

#include <cmath>
#include <stdexcept>
#include <string>
#include <utility>

namespace commkit::ad {

namespace {

void check(bool ok, const std::string& msg) {
  if (!ok) throw std::invalid_argument(msg);
}

void check_same_tape(Var a, Var b, const char* op) {
  check(a.defined() && b.defined() && a.tape == b.tape,
        std::string(op) + ": operands must live on one tape");
}

// out += a * b
void mm_nn_acc(const Tensor& a, const Tensor& b, Tensor& out) {
  const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
#pragma omp parallel for schedule(static) if (m * k * n > (1u << 16))
  for (long long ii = 0; ii < static_cast<long long>(m); ++ii) {
    auto i = static_cast<std::size_t>(ii);
    double* out_row = out.row_ptr(i);
    const double* a_row = a.row_ptr(i);
    for (std::size_t p = 0; p < k; ++p) {
      const double av = a_row[p];
      if (av == 0.0) continue;
      const double* b_row = b.row_ptr(p);
      for (std::size_t j = 0; j < n; ++j) out_row[j] += av * b_row[j];
    }
  }
}

// out += a * b^T
void mm_nt_acc(const Tensor& a, const Tensor& b, Tensor& out) {
  const std::size_t m = a.rows(), k = a.cols(), n = b.rows();
#pragma omp parallel for schedule(static) if (m * k * n > (1u << 16))
  for (long long ii = 0; ii < static_cast<long long>(m); ++ii) {
    auto i = static_cast<std::size_t>(ii);
    double* out_row = out.row_ptr(i);
    const double* a_row = a.row_ptr(i);
    for (std::size_t j = 0; j < n; ++j) {
      const double* b_row = b.row_ptr(j);
      double acc = 0.0;
      for (std::size_t p = 0; p < k; ++p) acc += a_row[p] * b_row[p];
      out_row[j] += acc;
    }
  }
}

// out += a^T * b
void mm_tn_acc(const Tensor& a, const Tensor& b, Tensor& out) {
  const std::size_t m = a.cols(), k = a.rows(), n = b.cols();
#pragma omp parallel for schedule(static) if (m * k * n > (1u << 16))
  for (long long ii = 0; ii < static_cast<long long>(m); ++ii) {
    auto i = static_cast<std::size_t>(ii);
    double* out_row = out.row_ptr(i);
    for (std::size_t p = 0; p < k; ++p) {
      const double av = a(p, i);
      if (av == 0.0) continue;
      const double* b_row = b.row_ptr(p);
      for (std::size_t j = 0; j < n; ++j) out_row[j] += av * b_row[j];
    }
  }
}

Var unary_elementwise(Var a, const std::function<double(double)>& f,
                      const std::function<double(double, double)>& dfdx_from_xy) {
  const Tensor& x = a.tape->value(a.id);
  Tensor y(x.rows(), x.cols());
  for (std::size_t i = 0; i < x.size(); ++i) y.at_flat(i) = f(x.at_flat(i));
  int pid = a.id;
  return a.tape->emit(std::move(y), {pid}, [pid, dfdx_from_xy](Tape& t, int self) {
    if (!t.requires_grad(pid)) return;
    const Tensor& g = t.grad_ref(self);
    const Tensor& x = t.value(pid);
    const Tensor& y = t.value(self);
    Tensor& gx = t.grad_buf(pid);
    for (std::size_t i = 0; i < x.size(); ++i)
      gx.at_flat(i) += g.at_flat(i) * dfdx_from_xy(x.at_flat(i), y.at_flat(i));
  });
}

}  // namespace

const Tensor& Var::value() const { return tape->value(id); }

Var Tape::leaf(Tensor value, bool requires_grad) {
  Node n;
  n.value = std::move(value);
  n.requires_grad = requires_grad;
  nodes_.push_back(std::move(n));
  return Var{this, static_cast<int>(nodes_.size() - 1)};
}

Var Tape::emit(Tensor value, const std::vector<int>& parents, BackwardFn back) {
  Node n;
  n.value = std::move(value);
  for (int p : parents) n.requires_grad = n.requires_grad || nodes_[p].requires_grad;
  if (n.requires_grad) n.back = std::move(back);
  nodes_.push_back(std::move(n));
  return Var{this, static_cast<int>(nodes_.size() - 1)};
}

Tensor& Tape::grad_buf(int id) {
  Node& n = nodes_[id];
  if (n.grad.empty()) n.grad = Tensor(n.value.rows(), n.value.cols());
  return n.grad;
}

void Tape::backward(Var out) {
  check(out.defined() && out.tape == this, "backward: var not on this tape");
  check(value(out.id).size() == 1, "backward: output must be scalar (1x1)");
  grad_buf(out.id).at_flat(0) = 1.0;
  for (int i = out.id; i >= 0; --i) {
    Node& n = nodes_[i];
    if (n.back && n.requires_grad && !n.grad.empty()) n.back(*this, i);
  }
}

Tensor Tape::grad_value(Var v) const {
  check(v.defined() && v.tape == this, "grad_value: var not on this tape");
  const Node& n = nodes_[v.id];
  if (n.grad.empty()) return Tensor(n.value.rows(), n.value.cols());
  return n.grad;
}

Tensor matmul_nn(const Tensor& a, const Tensor& b) {
  check(a.cols() == b.rows(), "matmul: inner dimensions disagree");
  Tensor out(a.rows(), b.cols());
  mm_nn_acc(a, b, out);
  return out;
}

Var matmul(Var a, Var b) {
  check_same_tape(a, b, "matmul");
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  Tensor out = matmul_nn(av, bv);
  int pa = a.id, pb = b.id;
  return a.tape->emit(std::move(out), {pa, pb}, [pa, pb](Tape& t, int self) {
    const Tensor& g = t.grad_ref(self);
    if (t.requires_grad(pa)) mm_nt_acc(g, t.value(pb), t.grad_buf(pa));
    if (t.requires_grad(pb)) mm_tn_acc(t.value(pa), g, t.grad_buf(pb));
  });
}

Var spmm(const SparseMatrix& s, Var d) {
  const Tensor& dv = d.value();
  check(s.n_cols == dv.rows(), "spmm: shape mismatch");
  Tensor out = s.multiply(dv);
  int pd = d.id;
  const SparseMatrix* sp = &s;  // caller keeps the sparse operand alive for the pass
  return d.tape->emit(std::move(out), {pd}, [pd, sp](Tape& t, int self) {
    if (!t.requires_grad(pd)) return;
    Tensor gd = sp->transpose_multiply(t.grad_ref(self));
    Tensor& acc = t.grad_buf(pd);
    for (std::size_t i = 0; i < acc.size(); ++i) acc.at_flat(i) += gd.at_flat(i);
  });
}

Var add(Var a, Var b) {
  check_same_tape(a, b, "add");
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  check(av.same_shape(bv), "add: shape mismatch");
  Tensor out(av.rows(), av.cols());
  for (std::size_t i = 0; i < av.size(); ++i) out.at_flat(i) = av.at_flat(i) + bv.at_flat(i);
  int pa = a.id, pb = b.id;
  return a.tape->emit(std::move(out), {pa, pb}, [pa, pb](Tape& t, int self) {
    const Tensor& g = t.grad_ref(self);
    for (int p : {pa, pb}) {
      if (!t.requires_grad(p)) continue;
      Tensor& acc = t.grad_buf(p);
      for (std::size_t i = 0; i < g.size(); ++i) acc.at_flat(i) += g.at_flat(i);
    }
  });
}

Var sub(Var a, Var b) {
  check_same_tape(a, b, "sub");
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  check(av.same_shape(bv), "sub: shape mismatch");
  Tensor out(av.rows(), av.cols());
  for (std::size_t i = 0; i < av.size(); ++i) out.at_flat(i) = av.at_flat(i) - bv.at_flat(i);
  int pa = a.id, pb = b.id;
  return a.tape->emit(std::move(out), {pa, pb}, [pa, pb](Tape& t, int self) {
    const Tensor& g = t.grad_ref(self);
    if (t.requires_grad(pa)) {
      Tensor& acc = t.grad_buf(pa);
      for (std::size_t i = 0; i < g.size(); ++i) acc.at_flat(i) += g.at_flat(i);
    }
    if (t.requires_grad(pb)) {
      Tensor& acc = t.grad_buf(pb);
      for (std::size_t i = 0; i < g.size(); ++i) acc.at_flat(i) -= g.at_flat(i);
    }
  });
}

Var mul(Var a, Var b) {
  check_same_tape(a, b, "mul");
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  check(av.same_shape(bv), "mul: shape mismatch");
  Tensor out(av.rows(), av.cols());
  for (std::size_t i = 0; i < av.size(); ++i) out.at_flat(i) = av.at_flat(i) * bv.at_flat(i);
  int pa = a.id, pb = b.id;
  return a.tape->emit(std::move(out), {pa, pb}, [pa, pb](Tape& t, int self) {
    const Tensor& g = t.grad_ref(self);
    if (t.requires_grad(pa)) {
      Tensor& acc = t.grad_buf(pa);
      const Tensor& other = t.value(pb);
      for (std::size_t i = 0; i < g.size(); ++i) acc.at_flat(i) += g.at_flat(i) * other.at_flat(i);
    }
    if (t.requires_grad(pb)) {
      Tensor& acc = t.grad_buf(pb);
      const Tensor& other = t.value(pa);
      for (std::size_t i = 0; i < g.size(); ++i) acc.at_flat(i) += g.at_flat(i) * other.at_flat(i);
    }
  });
}

Var divide(Var a, Var b) {
  check_same_tape(a, b, "divide");
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  check(av.same_shape(bv), "divide: shape mismatch");
  Tensor out(av.rows(), av.cols());
  for (std::size_t i = 0; i < av.size(); ++i) out.at_flat(i) = av.at_flat(i) / bv.at_flat(i);
  int pa = a.id, pb = b.id;
  return a.tape->emit(std::move(out), {pa, pb}, [pa, pb](Tape& t, int self) {
    const Tensor& g = t.grad_ref(self);
    const Tensor& av = t.value(pa);
    const Tensor& bv = t.value(pb);
    if (t.requires_grad(pa)) {
      Tensor& acc = t.grad_buf(pa);
      for (std::size_t i = 0; i < g.size(); ++i) acc.at_flat(i) += g.at_flat(i) / bv.at_flat(i);
    }
    if (t.requires_grad(pb)) {
      Tensor& acc = t.grad_buf(pb);
      for (std::size_t i = 0; i < g.size(); ++i) {
        const double bi = bv.at_flat(i);
        acc.at_flat(i) -= g.at_flat(i) * av.at_flat(i) / (bi * bi);
      }
    }
  });
}

Var add_rowvec(Var a, Var row) {
  check_same_tape(a, row, "add_rowvec");
  const Tensor& av = a.value();
  const Tensor& rv = row.value();
  check(rv.rows() == 1 && rv.cols() == av.cols(), "add_rowvec: row must be 1 x cols(a)");
  Tensor out(av.rows(), av.cols());
  for (std::size_t i = 0; i < av.rows(); ++i)
    for (std::size_t j = 0; j < av.cols(); ++j) out(i, j) = av(i, j) + rv(0, j);
  int pa = a.id, pr = row.id;
  return a.tape->emit(std::move(out), {pa, pr}, [pa, pr](Tape& t, int self) {
    const Tensor& g = t.grad_ref(self);
    if (t.requires_grad(pa)) {
      Tensor& acc = t.grad_buf(pa);
      for (std::size_t i = 0; i < g.size(); ++i) acc.at_flat(i) += g.at_flat(i);
    }
    if (t.requires_grad(pr)) {
      Tensor& acc = t.grad_buf(pr);
      for (std::size_t i = 0; i < g.rows(); ++i)
        for (std::size_t j = 0; j < g.cols(); ++j) acc(0, j) += g(i, j);
    }
  });
}

Var scale(Var a, double c) {
  const Tensor& av = a.value();
  Tensor out(av.rows(), av.cols());
  for (std::size_t i = 0; i < av.size(); ++i) out.at_flat(i) = c * av.at_flat(i);
  int pa = a.id;
  return a.tape->emit(std::move(out), {pa}, [pa, c](Tape& t, int self) {
    if (!t.requires_grad(pa)) return;
    const Tensor& g = t.grad_ref(self);
    Tensor& acc = t.grad_buf(pa);
    for (std::size_t i = 0; i < g.size(); ++i) acc.at_flat(i) += c * g.at_flat(i);
  });
}

Var add_const(Var a, double c) {
  const Tensor& av = a.value();
  Tensor out(av.rows(), av.cols());
  for (std::size_t i = 0; i < av.size(); ++i) out.at_flat(i) = av.at_flat(i) + c;
  int pa = a.id;
  return a.tape->emit(std::move(out), {pa}, [pa](Tape& t, int self) {
    if (!t.requires_grad(pa)) return;
    const Tensor& g = t.grad_ref(self);
    Tensor& acc = t.grad_buf(pa);
    for (std::size_t i = 0; i < g.size(); ++i) acc.at_flat(i) += g.at_flat(i);
  });
}

Var relu(Var a) {
  return unary_elementwise(
      a, [](double x) { return x > 0.0 ? x : 0.0; },
      [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

Var leaky_relu(Var a, double negative_slope) {
  return unary_elementwise(
      a, [negative_slope](double x) { return x > 0.0 ? x : negative_slope * x; },
      [negative_slope](double x, double) { return x > 0.0 ? 1.0 : negative_slope; });
}

double sigmoid_scalar(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double softplus_scalar(double x) {
  if (x > 0.0) return x + std::log1p(std::exp(-x));
  return std::log1p(std::exp(x));
}

Var sigmoid(Var a) {
  return unary_elementwise(a, sigmoid_scalar, [](double, double y) { return y * (1.0 - y); });
}

Var softplus(Var a) {
  return unary_elementwise(a, softplus_scalar, [](double x, double) { return sigmoid_scalar(x); });
}

Var sqrt_elem(Var a) {
  return unary_elementwise(
      a, [](double x) { return std::sqrt(x); },
      [](double, double y) { return y > 0.0 ? 0.5 / y : 0.0; });
}

Var gather_rows(Var a, std::vector<std::uint32_t> idx) {
  const Tensor& av = a.value();
  for (std::uint32_t r : idx) check(r < av.rows(), "gather_rows: index out of range");
  Tensor out(idx.size(), av.cols());
  for (std::size_t e = 0; e < idx.size(); ++e)
    for (std::size_t j = 0; j < av.cols(); ++j) out(e, j) = av(idx[e], j);
  int pa = a.id;
  return a.tape->emit(std::move(out), {pa}, [pa, idx = std::move(idx)](Tape& t, int self) {
    if (!t.requires_grad(pa)) return;
    const Tensor& g = t.grad_ref(self);
    Tensor& acc = t.grad_buf(pa);
    for (std::size_t e = 0; e < idx.size(); ++e)
      for (std::size_t j = 0; j < g.cols(); ++j) acc(idx[e], j) += g(e, j);
  });
}

Var segment_sum(Var a, std::vector<std::size_t> seg_ptr) {
  const Tensor& av = a.value();
  check(!seg_ptr.empty() && seg_ptr.back() == av.rows(), "segment_sum: bad segment pointers");
  const std::size_t n_seg = seg_ptr.size() - 1;
  Tensor out(n_seg, av.cols());
  for (std::size_t s = 0; s < n_seg; ++s)
    for (std::size_t e = seg_ptr[s]; e < seg_ptr[s + 1]; ++e)
      for (std::size_t j = 0; j < av.cols(); ++j) out(s, j) += av(e, j);
  int pa = a.id;
  return a.tape->emit(std::move(out), {pa}, [pa, seg = std::move(seg_ptr)](Tape& t, int self) {
    if (!t.requires_grad(pa)) return;
    const Tensor& g = t.grad_ref(self);
    Tensor& acc = t.grad_buf(pa);
    for (std::size_t s = 0; s + 1 < seg.size(); ++s)
      for (std::size_t e = seg[s]; e < seg[s + 1]; ++e)
        for (std::size_t j = 0; j < g.cols(); ++j) acc(e, j) += g(s, j);
  });
}

Var segment_softmax(Var logits, std::vector<std::size_t> seg_ptr) {
  const Tensor& lv = logits.value();
  check(lv.cols() == 1, "segment_softmax: logits must be Ex1");
  check(!seg_ptr.empty() && seg_ptr.back() == lv.rows(), "segment_softmax: bad segment pointers");
  Tensor out(lv.rows(), 1);
  for (std::size_t s = 0; s + 1 < seg_ptr.size(); ++s) {
    const std::size_t b = seg_ptr[s], e = seg_ptr[s + 1];
    if (b == e) continue;
    double m = lv(b, 0);
    for (std::size_t i = b + 1; i < e; ++i) m = std::max(m, lv(i, 0));
    double z = 0.0;
    for (std::size_t i = b; i < e; ++i) {
      out(i, 0) = std::exp(lv(i, 0) - m);
      z += out(i, 0);
    }
    for (std::size_t i = b; i < e; ++i) out(i, 0) /= z;
  }
  int pl = logits.id;
  return logits.tape->emit(std::move(out), {pl}, [pl, seg = std::move(seg_ptr)](Tape& t, int self) {
    if (!t.requires_grad(pl)) return;
    const Tensor& g = t.grad_ref(self);
    const Tensor& alpha = t.value(self);
    Tensor& acc = t.grad_buf(pl);
    for (std::size_t s = 0; s + 1 < seg.size(); ++s) {
      const std::size_t b = seg[s], e = seg[s + 1];
      double dot = 0.0;
      for (std::size_t i = b; i < e; ++i) dot += g(i, 0) * alpha(i, 0);
      for (std::size_t i = b; i < e; ++i) acc(i, 0) += alpha(i, 0) * (g(i, 0) - dot);
    }
  });
}

Var row_sum(Var a) {
  const Tensor& av = a.value();
  Tensor out(av.rows(), 1);
  for (std::size_t i = 0; i < av.rows(); ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < av.cols(); ++j) s += av(i, j);
    out(i, 0) = s;
  }
  int pa = a.id;
  return a.tape->emit(std::move(out), {pa}, [pa](Tape& t, int self) {
    if (!t.requires_grad(pa)) return;
    const Tensor& g = t.grad_ref(self);
    Tensor& acc = t.grad_buf(pa);
    for (std::size_t i = 0; i < acc.rows(); ++i)
      for (std::size_t j = 0; j < acc.cols(); ++j) acc(i, j) += g(i, 0);
  });
}

Var mul_rowscalar(Var a, Var s) {
  check_same_tape(a, s, "mul_rowscalar");
  const Tensor& av = a.value();
  const Tensor& sv = s.value();
  check(sv.rows() == av.rows() && sv.cols() == 1, "mul_rowscalar: scaler must be rows(a) x 1");
  Tensor out(av.rows(), av.cols());
  for (std::size_t i = 0; i < av.rows(); ++i)
    for (std::size_t j = 0; j < av.cols(); ++j) out(i, j) = av(i, j) * sv(i, 0);
  int pa = a.id, ps = s.id;
  return a.tape->emit(std::move(out), {pa, ps}, [pa, ps](Tape& t, int self) {
    const Tensor& g = t.grad_ref(self);
    const Tensor& av = t.value(pa);
    const Tensor& sv = t.value(ps);
    if (t.requires_grad(pa)) {
      Tensor& acc = t.grad_buf(pa);
      for (std::size_t i = 0; i < g.rows(); ++i)
        for (std::size_t j = 0; j < g.cols(); ++j) acc(i, j) += g(i, j) * sv(i, 0);
    }
    if (t.requires_grad(ps)) {
      Tensor& acc = t.grad_buf(ps);
      for (std::size_t i = 0; i < g.rows(); ++i) {
        double dot = 0.0;
        for (std::size_t j = 0; j < g.cols(); ++j) dot += g(i, j) * av(i, j);
        acc(i, 0) += dot;
      }
    }
  });
}

Var concat_cols(const std::vector<Var>& parts) {
  check(!parts.empty(), "concat_cols: empty part list");
  Tape* tape = parts[0].tape;
  const std::size_t rows = parts[0].value().rows();
  std::size_t total = 0;
  std::vector<int> pids;
  for (const Var& p : parts) {
    check(p.tape == tape, "concat_cols: operands must live on one tape");
    check(p.value().rows() == rows, "concat_cols: row count mismatch");
    total += p.value().cols();
    pids.push_back(p.id);
  }
  Tensor out(rows, total);
  std::size_t off = 0;
  for (const Var& p : parts) {
    const Tensor& pv = p.value();
    for (std::size_t i = 0; i < rows; ++i)
      for (std::size_t j = 0; j < pv.cols(); ++j) out(i, off + j) = pv(i, j);
    off += pv.cols();
  }
  return tape->emit(std::move(out), pids, [pids](Tape& t, int self) {
    const Tensor& g = t.grad_ref(self);
    std::size_t off = 0;
    for (int p : pids) {
      const std::size_t c = t.value(p).cols();
      if (t.requires_grad(p)) {
        Tensor& acc = t.grad_buf(p);
        for (std::size_t i = 0; i < g.rows(); ++i)
          for (std::size_t j = 0; j < c; ++j) acc(i, j) += g(i, off + j);
      }
      off += c;
    }
  });
}

Var average(const std::vector<Var>& parts) {
  check(!parts.empty(), "average: empty part list");
  Tape* tape = parts[0].tape;
  const Tensor& first = parts[0].value();
  std::vector<int> pids;
  for (const Var& p : parts) {
    check(p.tape == tape, "average: operands must live on one tape");
    check(p.value().same_shape(first), "average: shape mismatch");
    pids.push_back(p.id);
  }
  const double inv = 1.0 / static_cast<double>(parts.size());
  Tensor out(first.rows(), first.cols());
  for (const Var& p : parts) {
    const Tensor& pv = p.value();
    for (std::size_t i = 0; i < out.size(); ++i) out.at_flat(i) += pv.at_flat(i);
  }
  for (std::size_t i = 0; i < out.size(); ++i) out.at_flat(i) *= inv;
  return tape->emit(std::move(out), pids, [pids, inv](Tape& t, int self) {
    const Tensor& g = t.grad_ref(self);
    for (int p : pids) {
      if (!t.requires_grad(p)) continue;
      Tensor& acc = t.grad_buf(p);
      for (std::size_t i = 0; i < g.size(); ++i) acc.at_flat(i) += inv * g.at_flat(i);
    }
  });
}

Var row_replace(Var a, std::vector<std::uint32_t> rows, Var token) {
  check_same_tape(a, token, "row_replace");
  const Tensor& av = a.value();
  const Tensor& tv = token.value();
  check(tv.rows() == 1 && tv.cols() == av.cols(), "row_replace: token must be 1 x cols(a)");
  for (std::uint32_t r : rows) check(r < av.rows(), "row_replace: index out of range");
  std::vector<char> replaced(av.rows(), 0);
  for (std::uint32_t r : rows) replaced[r] = 1;
  Tensor out = av;
  for (std::size_t i = 0; i < av.rows(); ++i)
    if (replaced[i])
      for (std::size_t j = 0; j < av.cols(); ++j) out(i, j) = tv(0, j);
  int pa = a.id, pt = token.id;
  return a.tape->emit(std::move(out), {pa, pt},
                      [pa, pt, replaced = std::move(replaced)](Tape& t, int self) {
    const Tensor& g = t.grad_ref(self);
    if (t.requires_grad(pa)) {
      Tensor& acc = t.grad_buf(pa);
      for (std::size_t i = 0; i < g.rows(); ++i)
        if (!replaced[i])
          for (std::size_t j = 0; j < g.cols(); ++j) acc(i, j) += g(i, j);
    }
    if (t.requires_grad(pt)) {
      Tensor& acc = t.grad_buf(pt);
      for (std::size_t i = 0; i < g.rows(); ++i)
        if (replaced[i])
          for (std::size_t j = 0; j < g.cols(); ++j) acc(0, j) += g(i, j);
    }
  });
}

Var dropout(Var a, double rate, Rng& rng, bool training) {
  check(rate >= 0.0 && rate < 1.0, "dropout: rate must be in [0,1)");
  if (!training || rate == 0.0) return a;  // identity at evaluation time and at rate 0
  const Tensor& av = a.value();
  Tensor mask(av.rows(), av.cols());
  const double keep_scale = 1.0 / (1.0 - rate);
  for (std::size_t i = 0; i < mask.size(); ++i)
    mask.at_flat(i) = rng.uniform() < rate ? 0.0 : keep_scale;
  Tensor out(av.rows(), av.cols());
  for (std::size_t i = 0; i < out.size(); ++i) out.at_flat(i) = av.at_flat(i) * mask.at_flat(i);
  int pa = a.id;
  return a.tape->emit(std::move(out), {pa}, [pa, mask = std::move(mask)](Tape& t, int self) {
    if (!t.requires_grad(pa)) return;
    const Tensor& g = t.grad_ref(self);
    Tensor& acc = t.grad_buf(pa);
    for (std::size_t i = 0; i < g.size(); ++i) acc.at_flat(i) += g.at_flat(i) * mask.at_flat(i);
  });
}

Var sum_all(Var a) {
  const Tensor& av = a.value();
  double s = 0.0;
  for (std::size_t i = 0; i < av.size(); ++i) s += av.at_flat(i);
  int pa = a.id;
  return a.tape->emit(Tensor::scalar(s), {pa}, [pa](Tape& t, int self) {
    if (!t.requires_grad(pa)) return;
    const double g = t.grad_ref(self).at_flat(0);
    Tensor& acc = t.grad_buf(pa);
    for (std::size_t i = 0; i < acc.size(); ++i) acc.at_flat(i) += g;
  });
}

Var mean_all(Var a) {
  const Tensor& av = a.value();
  check(av.size() > 0, "mean_all: empty tensor");
  return scale(sum_all(a), 1.0 / static_cast<double>(av.size()));
}

Var l21_colnorm_sum(Var w) {
  const Tensor& wv = w.value();
  double total = 0.0;
  for (std::size_t j = 0; j < wv.cols(); ++j) {
    double ss = 0.0;
    for (std::size_t i = 0; i < wv.rows(); ++i) ss += wv(i, j) * wv(i, j);
    total += std::sqrt(ss);
  }
  int pw = w.id;
  return w.tape->emit(Tensor::scalar(total), {pw}, [pw](Tape& t, int self) {
    if (!t.requires_grad(pw)) return;
    const double g = t.grad_ref(self).at_flat(0);
    const Tensor& wv = t.value(pw);
    Tensor& acc = t.grad_buf(pw);
    for (std::size_t j = 0; j < wv.cols(); ++j) {
      double ss = 0.0;
      for (std::size_t i = 0; i < wv.rows(); ++i) ss += wv(i, j) * wv(i, j);
      const double norm = std::sqrt(ss);
      if (norm == 0.0) continue;  // zero column keeps a zero subgradient
      for (std::size_t i = 0; i < wv.rows(); ++i) acc(i, j) += g * wv(i, j) / norm;
    }
  });
}

}  // namespace commkit::ad

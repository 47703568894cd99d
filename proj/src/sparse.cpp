#include "commkit/sparse.hpp"

#include <stdexcept>

namespace commkit {

Tensor SparseMatrix::multiply(const Tensor& dense) const {
  if (dense.rows() != n_cols) throw std::invalid_argument("SparseMatrix::multiply: shape mismatch");
  Tensor out(n_rows, dense.cols());
  const std::size_t h = dense.cols();
#pragma omp parallel for schedule(static) if (nnz() * h > (1u << 16))
  for (long long ri = 0; ri < static_cast<long long>(n_rows); ++ri) {
    auto r = static_cast<std::size_t>(ri);
    double* out_row = out.row_ptr(r);
    for (std::size_t e = row_ptr[r]; e < row_ptr[r + 1]; ++e) {
      const double v = val[e];
      const double* d_row = dense.row_ptr(col[e]);
      for (std::size_t j = 0; j < h; ++j) out_row[j] += v * d_row[j];
    }
  }
  return out;
}

Tensor SparseMatrix::transpose_multiply(const Tensor& dense) const {
  if (dense.rows() != n_rows)
    throw std::invalid_argument("SparseMatrix::transpose_multiply: shape mismatch");
  Tensor out(n_cols, dense.cols());
  const std::size_t h = dense.cols();
  for (std::size_t r = 0; r < n_rows; ++r) {
    const double* d_row = dense.row_ptr(r);
    for (std::size_t e = row_ptr[r]; e < row_ptr[r + 1]; ++e) {
      const double v = val[e];
      double* out_row = out.row_ptr(col[e]);
      for (std::size_t j = 0; j < h; ++j) out_row[j] += v * d_row[j];
    }
  }
  return out;
}

Tensor SparseMatrix::to_dense() const {
  Tensor out(n_rows, n_cols);
  for (std::size_t r = 0; r < n_rows; ++r)
    for (std::size_t e = row_ptr[r]; e < row_ptr[r + 1]; ++e) out(r, col[e]) += val[e];
  return out;
}

SparseMatrix SparseMatrix::identity(std::size_t n) {
  SparseMatrix s;
  s.n_rows = s.n_cols = n;
  s.row_ptr.resize(n + 1);
  s.col.resize(n);
  s.val.assign(n, 1.0);
  for (std::size_t i = 0; i < n; ++i) {
    s.row_ptr[i] = i;
    s.col[i] = static_cast<std::uint32_t>(i);
  }
  s.row_ptr[n] = n;
  return s;
}

}  // namespace commkit

#pragma once

#include <cstdint>
#include <vector>

#include "commkit/tensor.hpp"

namespace commkit {

// CSR sparse matrix.
struct SparseMatrix {
  std::size_t n_rows = 0, n_cols = 0;
  std::vector<std::size_t> row_ptr;  // n_rows + 1
  std::vector<std::uint32_t> col;
  std::vector<double> val;

  std::size_t nnz() const { return col.size(); }

  Tensor multiply(const Tensor& dense) const;            // S * d
  Tensor transpose_multiply(const Tensor& dense) const;  // S^T * d
  Tensor to_dense() const;

  static SparseMatrix identity(std::size_t n);
};

}  // namespace commkit

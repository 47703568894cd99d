#include "commkit/tensor.hpp"

#include <cmath>
#include <cstring>
#include <stdexcept>

namespace commkit {

Tensor Tensor::from_rows(std::initializer_list<std::initializer_list<double>> rows) {
  Tensor t(rows.size(), rows.size() ? rows.begin()->size() : 0);
  std::size_t i = 0;
  for (const auto& row : rows) {
    if (row.size() != t.cols_) throw std::invalid_argument("Tensor::from_rows: ragged rows");
    std::size_t j = 0;
    for (double v : row) t(i, j++) = v;
    ++i;
  }
  return t;
}

bool Tensor::all_finite() const {
  for (double v : data_)
    if (!std::isfinite(v)) return false;
  return true;
}

double Tensor::item() const {
  if (size() != 1) throw std::logic_error("Tensor::item: tensor is not 1x1");
  return data_[0];
}

void Tensor::fill(double v) {
  for (double& x : data_) x = v;
}

bool bitwise_equal(const Tensor& a, const Tensor& b) {
  if (!a.same_shape(b)) return false;
  return std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0;
}

double max_abs_diff(const Tensor& a, const Tensor& b) {
  if (!a.same_shape(b)) throw std::invalid_argument("max_abs_diff: shape mismatch");
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::fabs(a.at_flat(i) - b.at_flat(i)));
  return m;
}

}  // namespace commkit

#pragma once

#include <string>
#include <vector>

#include "commkit/tensor.hpp"

namespace commkit {

// Ordered, named learnable tensors. Registration order defines the
// serialization order and the optimizer slot layout.
class ParameterStore {
public:
  std::size_t add(std::string name, Tensor value) {
    names_.push_back(std::move(name));
    values_.push_back(std::move(value));
    return names_.size() - 1;
  }

  std::size_t count() const { return names_.size(); }
  const std::string& name(std::size_t i) const { return names_[i]; }
  Tensor& value(std::size_t i) { return values_[i]; }
  const Tensor& value(std::size_t i) const { return values_[i]; }

private:
  std::vector<std::string> names_;
  std::vector<Tensor> values_;
};

}  // namespace commkit

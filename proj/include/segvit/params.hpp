#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "segvit/tensor.hpp"

namespace segvit {

using Rng = std::mt19937_64;

template <typename T>
struct Parameter {
  std::string name;
  Tensor<T> tensor;
};

enum class Init { kZeros, kOnes, kNormal, kTruncNormal };

// Ordered registry of named leaves. Names are unique; order is registration
// order, which is also checkpoint order.
template <typename T>
class ParameterStore {
 public:
  Tensor<T> add(const std::string& name, Shape shape, Init init, Rng& rng, double std = 0.02);

  const std::vector<Parameter<T>>& all() const { return params_; }
  std::vector<Parameter<T>>& all() { return params_; }
  Tensor<T> get(const std::string& name) const;
  bool contains(const std::string& name) const;
  void zero_grad();
  int64_t scalar_count() const;

 private:
  std::vector<Parameter<T>> params_;
};

extern template class ParameterStore<float>;
extern template class ParameterStore<double>;

}  // namespace segvit

#include "segvit/params.hpp"

#include <algorithm>
#include <cmath>

#include "segvit/errors.hpp"

namespace segvit {

template <typename T>
Tensor<T> ParameterStore<T>::add(const std::string& name, Shape shape, Init init, Rng& rng,
                                 double std) {
  if (contains(name)) throw ConfigError("duplicate parameter name '" + name + "'");
  const auto n = static_cast<size_t>(shape_numel(shape));
  std::vector<T> values(n, T(0));
  std::normal_distribution<double> normal(0.0, 1.0);
  switch (init) {
    case Init::kZeros:
      break;
    case Init::kOnes:
      std::fill(values.begin(), values.end(), T(1));
      break;
    case Init::kNormal:
      for (auto& v : values) v = static_cast<T>(std * normal(rng));
      break;
    case Init::kTruncNormal:
      // Redraw outside two standard deviations.
      for (auto& v : values) {
        double z = normal(rng);
        while (std::abs(z) > 2.0) z = normal(rng);
        v = static_cast<T>(std * z);
      }
      break;
  }
  auto t = Tensor<T>::from_data(std::move(shape), std::move(values));
  t.set_requires_grad(true);
  params_.push_back({name, t});
  return t;
}

template <typename T>
Tensor<T> ParameterStore<T>::get(const std::string& name) const {
  auto it = std::find_if(params_.begin(), params_.end(),
                         [&](const Parameter<T>& p) { return p.name == name; });
  if (it == params_.end()) throw ConfigError("unknown parameter '" + name + "'");
  return it->tensor;
}

template <typename T>
bool ParameterStore<T>::contains(const std::string& name) const {
  return std::any_of(params_.begin(), params_.end(),
                     [&](const Parameter<T>& p) { return p.name == name; });
}

template <typename T>
void ParameterStore<T>::zero_grad() {
  for (auto& p : params_) p.tensor.zero_grad();
}

template <typename T>
int64_t ParameterStore<T>::scalar_count() const {
  int64_t n = 0;
  for (const auto& p : params_) n += p.tensor.numel();
  return n;
}

template class ParameterStore<float>;
template class ParameterStore<double>;

}  // namespace segvit

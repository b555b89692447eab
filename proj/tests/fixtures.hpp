#pragma once

#include <random>

#include "segvit/config.hpp"
#include "segvit/model.hpp"
#include "segvit/tensor.hpp"

namespace fixture {

template <typename T = double>
segvit::Tensor<T> random_tensor(segvit::Shape shape, uint64_t seed, double lo = -1.0, double hi = 1.0) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(lo, hi);
  std::vector<T> v(static_cast<size_t>(segvit::shape_numel(shape)));
  for (auto& x : v) x = static_cast<T>(u(rng));
  return segvit::Tensor<T>::from_data(std::move(shape), std::move(v));
}

inline segvit::EncoderConfig encoder(int64_t size, int64_t patch, int64_t depth, int64_t width,
                                     int64_t heads) {
  segvit::EncoderConfig c;
  c.image_height = size;
  c.image_width = size;
  c.patch_size = patch;
  c.depth = depth;
  c.width = width;
  c.heads = heads;
  return c;
}

// Small model configs that keep tests fast.
inline segvit::ModelConfig model(segvit::EncoderConfig e, std::vector<int> cascade, int64_t classes) {
  segvit::ModelConfig m;
  m.encoder = e;
  m.decoder.cascade_layers = std::move(cascade);
  m.decoder.num_classes = classes;
  return m;
}

inline void fill(segvit::Tensor<double> t, double value) {
  for (double& v : t.mutable_data()) v = value;
}

// Zeroes every parameter whose name starts with `prefix`.
inline void zero_prefix(segvit::ParameterStore<double>& store, const std::string& prefix) {
  for (auto& p : store.all()) {
    if (p.name.rfind(prefix, 0) == 0) fill(p.tensor, 0.0);
  }
}

// Randomizes every parameter (norms and biases included) so tests do not
// depend on the identity-like initial values.
inline void scramble(segvit::ParameterStore<double>& store, uint64_t seed, double scale = 0.3) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0.0, scale);
  for (auto& p : store.all()) {
    for (double& v : p.tensor.mutable_data()) v += n(rng);
  }
}

}  // namespace fixture

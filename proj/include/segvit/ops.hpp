#pragma once

#include <cstdint>
#include <vector>

#include "segvit/tensor.hpp"

namespace segvit {

// Matrix product over the last two axes. Leading (batch) axes must agree, or
// one operand must be a plain matrix that is shared across the batch.
template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b);

// Swaps the last two axes.
template <typename T>
Tensor<T> transpose(const Tensor<T>& x);

// Elementwise sum. `b` may have the same shape as `a` or equal a trailing
// suffix of it (bias rows, position tables).
template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b);

template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b);

template <typename T>
Tensor<T> scale(const Tensor<T>& x, T factor);

template <typename T>
Tensor<T> sum(const Tensor<T>& x);

template <typename T>
Tensor<T> mean(const Tensor<T>& x);

// Reduces one axis away.
template <typename T>
Tensor<T> sum_axis(const Tensor<T>& x, int64_t axis);

// Max-subtracted softmax along `axis`.
template <typename T>
Tensor<T> softmax(const Tensor<T>& x, int64_t axis);

template <typename T>
Tensor<T> sigmoid(const Tensor<T>& x);

// tanh approximation
template <typename T>
Tensor<T> gelu(const Tensor<T>& x);

inline constexpr double kLayerNormEps = 1e-6;

// Normalizes over the last axis (biased variance, eps added to it).
template <typename T>
Tensor<T> layer_norm(const Tensor<T>& x, const Tensor<T>& gamma, const Tensor<T>& beta,
                     T eps = static_cast<T>(kLayerNormEps));

// x[..., in] · w[in, out] + b[out]
template <typename T>
Tensor<T> linear(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b);

template <typename T>
Tensor<T> reshape(const Tensor<T>& x, Shape shape);

// [L, H*d] -> [H, L, d]
template <typename T>
Tensor<T> split_heads(const Tensor<T>& x, int64_t heads);

// [H, L, d] -> [L, H*d]
template <typename T>
Tensor<T> merge_heads(const Tensor<T>& x);

// Picks rows of a [L, C] tensor; repeated indices accumulate in backward.
template <typename T>
Tensor<T> gather_rows(const Tensor<T>& x, const std::vector<int64_t>& rows);

// Half-pixel bilinear resize of [N, h, w] maps to [N, out_h, out_w]. Source
// coordinates are clamped at zero, matching the usual align_corners=false.
template <typename T>
Tensor<T> resize_bilinear(const Tensor<T>& x, int64_t out_h, int64_t out_w);

// Row-stochastic [out, in] interpolation matrix used by resize_bilinear.
std::vector<double> bilinear_weights(int64_t in, int64_t out);

}  // namespace segvit

#pragma once

#include <cstdint>
#include <vector>

#include "segvit/layers.hpp"

namespace segvit {

struct EncoderConfig {
  int64_t image_height = 32;
  int64_t image_width = 32;
  int64_t patch_size = 4;
  int64_t depth = 4;
  int64_t width = 64;
  int64_t heads = 4;
  int64_t mlp_ratio = 4;

  void validate() const;
  int64_t grid_h() const { return image_height / patch_size; }
  int64_t grid_w() const { return image_width / patch_size; }
  int64_t tokens() const { return grid_h() * grid_w(); }
  int64_t patch_dim() const { return patch_size * patch_size * 3; }
};

// L x C tokens laid out row-major over an (Hp, Wp) patch grid.
template <typename T>
struct TokenSequence {
  Tensor<T> tokens;
  int64_t grid_h = 0;
  int64_t grid_w = 0;
  int source_layer = 0;

  int64_t length() const { return tokens.dim(0); }
  int64_t width() const { return tokens.dim(1); }
  // Throws when L != Hp * Wp.
  void validate() const;
};

// Plain, non-hierarchical ViT. Parameters live under "encoder.".
template <typename T>
class VitEncoder {
 public:
  VitEncoder(const EncoderConfig& config, ParameterStore<T>& store, Rng& rng);

  // image: [H, W, 3]. Patch pixels are flattened in (row, col, channel) order.
  TokenSequence<T> patchify(const Tensor<T>& image) const;
  // Applies layer `index` (1-based).
  TokenSequence<T> apply_layer(int index, const TokenSequence<T>& x) const;
  // F_1 .. F_m
  std::vector<TokenSequence<T>> encode(const Tensor<T>& image) const;
  // Shared final norm applied to any F_i handed to a decoder.
  TokenSequence<T> output_norm(const TokenSequence<T>& x) const;

  const TransformerLayer<T>& layer(int index) const;
  const EncoderConfig& config() const { return config_; }

 private:
  EncoderConfig config_;
  Linear<T> patch_embed_;
  Tensor<T> pos_embed_;
  std::vector<TransformerLayer<T>> layers_;
  LayerNorm<T> norm_;
};

// Patch matrix [L, P*P*3] for an [H, W, 3] image.
template <typename T>
std::vector<T> extract_patches(std::span<const T> image, const EncoderConfig& config);

extern template class VitEncoder<float>;
extern template class VitEncoder<double>;

}  // namespace segvit

#include "segvit/encoder.hpp"

#include "segvit/errors.hpp"

namespace segvit {

void EncoderConfig::validate() const {
  if (patch_size <= 0 || image_height <= 0 || image_width <= 0) {
    throw ConfigError("image and patch extents must be positive");
  }
  if (image_height % patch_size != 0 || image_width % patch_size != 0) {
    throw ConfigError("image " + std::to_string(image_height) + "x" + std::to_string(image_width) +
                      " is not divisible by patch size " + std::to_string(patch_size));
  }
  if (depth < 1) throw ConfigError("encoder depth must be at least 1");
  if (width <= 0 || heads <= 0 || width % heads != 0) {
    throw ConfigError("encoder width " + std::to_string(width) + " is not divisible by " +
                      std::to_string(heads) + " heads");
  }
  if (mlp_ratio < 1) throw ConfigError("mlp_ratio must be at least 1");
}

template <typename T>
void TokenSequence<T>::validate() const {
  if (tokens.rank() != 2 || tokens.dim(0) != grid_h * grid_w) {
    throw DimensionError("token sequence " + shape_str(tokens.shape()) + " does not fill grid " +
                         std::to_string(grid_h) + "x" + std::to_string(grid_w));
  }
}

template <typename T>
std::vector<T> extract_patches(std::span<const T> image, const EncoderConfig& c) {
  const int64_t p = c.patch_size, gh = c.grid_h(), gw = c.grid_w();
  std::vector<T> patches(static_cast<size_t>(c.tokens() * c.patch_dim()));
  size_t k = 0;
  for (int64_t gy = 0; gy < gh; ++gy)
    for (int64_t gx = 0; gx < gw; ++gx)
      for (int64_t y = 0; y < p; ++y)
        for (int64_t x = 0; x < p; ++x)
          for (int64_t ch = 0; ch < 3; ++ch)
            patches[k++] = image[((gy * p + y) * c.image_width + gx * p + x) * 3 + ch];
  return patches;
}

template <typename T>
VitEncoder<T>::VitEncoder(const EncoderConfig& config, ParameterStore<T>& store, Rng& rng)
    : config_(config) {
  config_.validate();
  patch_embed_ = Linear<T>(store, "encoder.", "patch_embed", config_.patch_dim(), config_.width, rng);
  pos_embed_ = store.add("encoder.pos_embed", {config_.tokens(), config_.width}, Init::kNormal, rng);
  layers_.reserve(static_cast<size_t>(config_.depth));
  for (int64_t i = 1; i <= config_.depth; ++i) {
    layers_.emplace_back(store, "encoder.layer" + std::to_string(i) + ".", config_.width,
                         config_.heads, config_.mlp_ratio, rng);
  }
  norm_ = LayerNorm<T>(store, "encoder.norm.", config_.width, rng);
}

template <typename T>
TokenSequence<T> VitEncoder<T>::patchify(const Tensor<T>& image) const {
  if (image.shape() != Shape{config_.image_height, config_.image_width, 3}) {
    throw ConfigError("image shape " + shape_str(image.shape()) + " does not match configured " +
                      std::to_string(config_.image_height) + "x" +
                      std::to_string(config_.image_width) + "x3");
  }
  auto patches = Tensor<T>::from_data({config_.tokens(), config_.patch_dim()},
                                      extract_patches<T>(image.data(), config_));
  TokenSequence<T> out{add(patch_embed_(patches), pos_embed_), config_.grid_h(), config_.grid_w(), 0};
  return out;
}

template <typename T>
const TransformerLayer<T>& VitEncoder<T>::layer(int index) const {
  if (index < 1 || index > static_cast<int>(layers_.size())) {
    throw ConfigError("encoder layer index " + std::to_string(index) + " out of range");
  }
  return layers_[static_cast<size_t>(index - 1)];
}

template <typename T>
TokenSequence<T> VitEncoder<T>::apply_layer(int index, const TokenSequence<T>& x) const {
  return {layer(index)(x.tokens), x.grid_h, x.grid_w, index};
}

template <typename T>
std::vector<TokenSequence<T>> VitEncoder<T>::encode(const Tensor<T>& image) const {
  std::vector<TokenSequence<T>> outs;
  outs.reserve(layers_.size());
  TokenSequence<T> x = patchify(image);
  for (int i = 1; i <= static_cast<int>(layers_.size()); ++i) {
    x = apply_layer(i, x);
    outs.push_back(x);
  }
  return outs;
}

template <typename T>
TokenSequence<T> VitEncoder<T>::output_norm(const TokenSequence<T>& x) const {
  return {norm_(x.tokens), x.grid_h, x.grid_w, x.source_layer};
}

template struct TokenSequence<float>;
template struct TokenSequence<double>;
template class VitEncoder<float>;
template class VitEncoder<double>;
template std::vector<float> extract_patches(std::span<const float>, const EncoderConfig&);
template std::vector<double> extract_patches(std::span<const double>, const EncoderConfig&);

}  // namespace segvit

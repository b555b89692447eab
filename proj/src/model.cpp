#include "segvit/model.hpp"

#include <algorithm>

#include "segvit/errors.hpp"

namespace segvit {

void ModelConfig::validate() const {
  encoder.validate();
  decoder.validate(encoder.depth);
  shrunk.validate(encoder);
  if (shrunk.mode == ShrunkMode::kFull && shrunk.active(encoder.depth) &&
      decoder.cascade_layers.back() != encoder.depth) {
    throw ConfigError("full Shrunk mode feeds the up-sampled features as the deepest layer; "
                      "the cascade must include layer " + std::to_string(encoder.depth));
  }
}

template <typename T>
SegVitModel<T>::SegVitModel(const ModelConfig& config, uint64_t seed) : config_(config) {
  config_.validate();
  Rng rng(seed);
  encoder_ = std::make_unique<VitEncoder<T>>(config_.encoder, store_, rng);
  shrunk_ = std::make_unique<ShrunkBranch<T>>(config_.shrunk, config_.encoder, store_, rng);
  decoder_ = std::make_unique<AtmDecoder<T>>(config_.decoder, config_.encoder.width,
                                             config_.encoder.heads, store_, rng);
}

template <typename T>
std::vector<TokenSequence<T>> SegVitModel<T>::stage_features(
    const ShrunkFeatures<T>& features) const {
  std::vector<TokenSequence<T>> out;
  const DecoderConfig& dc = config_.decoder;
  for (int64_t s = 1; s <= dc.stages(); ++s) {
    const int layer = dc.layer_for_stage(s);
    if (features.qu_output && layer == config_.encoder.depth) {
      out.push_back(*features.qu_output);
    } else {
      out.push_back(encoder_->output_norm(features.backbone[static_cast<size_t>(layer - 1)]));
    }
  }
  return out;
}

template <typename T>
ModelOutput<T> SegVitModel<T>::forward(const Tensor<T>& image) const {
  ModelOutput<T> out;
  out.features = shrunk_->forward(*encoder_, image);
  out.stage_features = stage_features(out.features);
  out.cascade = (*decoder_)(out.stage_features);
  return out;
}

template class SegVitModel<float>;
template class SegVitModel<double>;

}  // namespace segvit

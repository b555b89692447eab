#include "segvit/atm_decoder.hpp"

#include <algorithm>
#include <cmath>

#include "segvit/errors.hpp"

namespace segvit {

void DecoderConfig::validate(int64_t depth) const {
  if (num_classes < 2) throw ConfigError("at least 2 classes are required");
  if (num_classes >= kIgnoreLabel) throw ConfigError("class count must stay below the ignore label");
  if (cascade_layers.empty()) throw ConfigError("cascade layer selection is empty");
  for (size_t i = 0; i < cascade_layers.size(); ++i) {
    const int l = cascade_layers[i];
    if (l < 1 || l > depth) {
      throw ConfigError("cascade layer " + std::to_string(l) + " outside encoder depth " +
                        std::to_string(depth));
    }
    if (i > 0 && l <= cascade_layers[i - 1]) {
      throw ConfigError("cascade layers must be strictly increasing");
    }
  }
  if (mlp_ratio < 1) throw ConfigError("decoder mlp_ratio must be at least 1");
}

int DecoderConfig::layer_for_stage(int64_t stage) const {
  if (stage < 1 || stage > stages()) throw ConfigError("stage index out of range");
  return cascade_layers[static_cast<size_t>(stages() - stage)];
}

template <typename T>
AtmBlock<T>::AtmBlock(ParameterStore<T>& store, const std::string& prefix, int64_t width,
                      int64_t heads, int64_t mlp_ratio, Rng& rng)
    : layer_(store, prefix, width, heads, mlp_ratio, rng) {}

template <typename T>
AtmOutput<T> AtmBlock<T>::operator()(const Tensor<T>& class_tokens,
                                     const TokenSequence<T>& features) const {
  features.validate();
  if (class_tokens.rank() != 2 || class_tokens.dim(1) != features.width()) {
    throw ConfigError("class tokens " + shape_str(class_tokens.shape()) +
                      " do not match feature width " + std::to_string(features.width()));
  }
  AtmOutput<T> out;
  out.tokens = layer_(class_tokens, features.tokens, &out.trace);
  // The mask branch reads the very tensor the softmax consumed.
  out.mask_logits = reshape(sum_axis(out.trace.similarity, 0),
                            {class_tokens.dim(0), features.grid_h, features.grid_w});
  out.grid_h = features.grid_h;
  out.grid_w = features.grid_w;
  return out;
}

template <typename T>
AtmDecoder<T>::AtmDecoder(const DecoderConfig& config, int64_t width, int64_t heads,
                          ParameterStore<T>& store, Rng& rng)
    : config_(config) {
  if (config_.cascade_layers.empty()) throw ConfigError("cascade layer selection is empty");
  class_embed_ = store.add("decoder.class_embed", {config_.num_classes, width}, Init::kNormal, rng);
  for (int64_t s = 1; s <= config_.stages(); ++s) {
    const std::string prefix = "decoder.stage" + std::to_string(s) + ".";
    Stage stage;
    stage.atm = AtmBlock<T>(store, prefix + "atm.", width, heads, config_.mlp_ratio, rng);
    stage.norm = LayerNorm<T>(store, prefix + "norm.", width, rng);
    stage.classifier = Linear<T>(store, prefix, "cls", width, config_.num_classes + 1, rng);
    stages_.push_back(std::move(stage));
  }
}

template <typename T>
CascadeOutput<T> AtmDecoder<T>::operator()(
    const std::vector<TokenSequence<T>>& stage_features) const {
  return decode(class_embed_, stage_features);
}

template <typename T>
CascadeOutput<T> AtmDecoder<T>::decode(const Tensor<T>& class_tokens,
                                       const std::vector<TokenSequence<T>>& stage_features) const {
  if (stage_features.empty()) throw ConfigError("cascade_decode: no features selected");
  if (stage_features.size() != stages_.size()) {
    throw ConfigError("cascade_decode: " + std::to_string(stage_features.size()) +
                      " feature sets for " + std::to_string(stages_.size()) + " stages");
  }
  CascadeOutput<T> out;
  // Masks are accumulated on the finest grid present.
  for (const auto& f : stage_features) {
    if (f.grid_h * f.grid_w > out.grid_h * out.grid_w) {
      out.grid_h = f.grid_h;
      out.grid_w = f.grid_w;
    }
  }
  Tensor<T> tokens = class_tokens;
  for (size_t s = 0; s < stages_.size(); ++s) {
    const Stage& stage = stages_[s];
    AtmOutput<T> r = stage.atm(tokens, stage_features[s]);
    tokens = r.tokens;
    out.class_logits.push_back(stage.classifier(stage.norm(tokens)));
    Tensor<T> on_grid = r.mask_logits;
    if (r.grid_h != out.grid_h || r.grid_w != out.grid_w) {
      on_grid = resize_bilinear(r.mask_logits, out.grid_h, out.grid_w);
    }
    out.stage_mask_logits.push_back(r.mask_logits);
    out.cumulative_mask_logits.push_back(
        s == 0 ? on_grid : add(out.cumulative_mask_logits.back(), on_grid));
    out.traces.push_back(std::move(r.trace));
  }
  return out;
}

template <typename T>
LabelMap semantic_inference(const Tensor<T>& class_logits, const Tensor<T>& mask_probs) {
  if (class_logits.rank() != 2 || mask_probs.rank() != 3 ||
      class_logits.dim(0) != mask_probs.dim(0) || class_logits.dim(1) != class_logits.dim(0) + 1) {
    throw DimensionError("semantic_inference: logits " + shape_str(class_logits.shape()) +
                         " and masks " + shape_str(mask_probs.shape()) + " are incompatible");
  }
  const int64_t n = class_logits.dim(0), k1 = class_logits.dim(1);
  const int64_t h = mask_probs.dim(1), w = mask_probs.dim(2);
  const auto logits = class_logits.data();
  std::vector<double> prob(static_cast<size_t>(n));
  for (int64_t c = 0; c < n; ++c) {
    double mx = logits[c * k1];
    for (int64_t j = 1; j < k1; ++j) mx = std::max<double>(mx, logits[c * k1 + j]);
    double total = 0;
    for (int64_t j = 0; j < k1; ++j) total += std::exp(static_cast<double>(logits[c * k1 + j]) - mx);
    prob[c] = std::exp(static_cast<double>(logits[c * k1 + c]) - mx) / total;
  }
  LabelMap out(h, w);
  const auto m = mask_probs.data();
  for (int64_t p = 0; p < h * w; ++p) {
    int64_t best = 0;
    double best_score = prob[0] * static_cast<double>(m[p]);
    for (int64_t c = 1; c < n; ++c) {
      const double score = prob[c] * static_cast<double>(m[c * h * w + p]);
      if (score > best_score) {
        best_score = score;
        best = c;
      }
    }
    out.labels[static_cast<size_t>(p)] = static_cast<uint8_t>(best);
  }
  return out;
}

template class AtmBlock<float>;
template class AtmBlock<double>;
template class AtmDecoder<float>;
template class AtmDecoder<double>;
template LabelMap semantic_inference(const Tensor<float>&, const Tensor<float>&);
template LabelMap semantic_inference(const Tensor<double>&, const Tensor<double>&);

}  // namespace segvit

#pragma once

#include <cstdint>
#include <vector>

#include "segvit/encoder.hpp"
#include "segvit/label_map.hpp"
#include "segvit/layers.hpp"

namespace segvit {

struct DecoderConfig {
  // N: one class token per dataset class. The classifier adds one more
  // "no object" slot.
  int64_t num_classes = 4;
  // 1-based encoder layers, strictly increasing. Stage 1 consumes the last
  // entry (deepest layer), later stages walk towards shallower layers.
  std::vector<int> cascade_layers = {2, 3, 4};
  int64_t mlp_ratio = 4;

  void validate(int64_t depth) const;
  int64_t stages() const { return static_cast<int64_t>(cascade_layers.size()); }
  // Encoder layer consumed by 1-based stage k.
  int layer_for_stage(int64_t stage) const;
};

template <typename T>
struct AtmOutput {
  Tensor<T> tokens;       // [N, C] updated class tokens
  Tensor<T> mask_logits;  // [N, Hp, Wp] head-summed similarity, before sigmoid
  AttentionTrace<T> trace;
  int64_t grid_h = 0;
  int64_t grid_w = 0;
};

// Attention-to-Mask block: a pre-norm decoder layer whose cross-attention
// similarity doubles as per-class mask logits.
template <typename T>
class AtmBlock {
 public:
  AtmBlock() = default;
  AtmBlock(ParameterStore<T>& store, const std::string& prefix, int64_t width, int64_t heads,
           int64_t mlp_ratio, Rng& rng);

  AtmOutput<T> operator()(const Tensor<T>& class_tokens, const TokenSequence<T>& features) const;

 private:
  DecoderLayer<T> layer_;
};

template <typename T>
struct CascadeOutput {
  std::vector<Tensor<T>> class_logits;            // per stage, [N, K+1]
  std::vector<Tensor<T>> stage_mask_logits;       // per stage, on its own grid
  std::vector<Tensor<T>> cumulative_mask_logits;  // per stage, on the decoder grid
  std::vector<AttentionTrace<T>> traces;
  int64_t grid_h = 0;
  int64_t grid_w = 0;

  const Tensor<T>& final_logits() const { return class_logits.back(); }
  const Tensor<T>& final_mask_logits() const { return cumulative_mask_logits.back(); }
};

// Cascade of ATM stages with a linear classifier per stage. Parameters live
// under "decoder.".
template <typename T>
class AtmDecoder {
 public:
  AtmDecoder(const DecoderConfig& config, int64_t width, int64_t heads, ParameterStore<T>& store,
             Rng& rng);

  // `stage_features[k]` feeds stage k+1.
  CascadeOutput<T> operator()(const std::vector<TokenSequence<T>>& stage_features) const;
  CascadeOutput<T> decode(const Tensor<T>& class_tokens,
                          const std::vector<TokenSequence<T>>& stage_features) const;

  const Tensor<T>& class_embeddings() const { return class_embed_; }
  const DecoderConfig& config() const { return config_; }

 private:
  struct Stage {
    AtmBlock<T> atm;
    LayerNorm<T> norm;
    Linear<T> classifier;
  };

  DecoderConfig config_;
  Tensor<T> class_embed_;
  std::vector<Stage> stages_;
};

// Per-pixel argmax over real classes of p(class c | token c) * mask_c.
// Ties go to the lowest class index.
template <typename T>
LabelMap semantic_inference(const Tensor<T>& class_logits, const Tensor<T>& mask_probs);

extern template class AtmBlock<float>;
extern template class AtmBlock<double>;
extern template class AtmDecoder<float>;
extern template class AtmDecoder<double>;

}  // namespace segvit

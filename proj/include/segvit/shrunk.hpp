#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "segvit/encoder.hpp"

namespace segvit {

enum class ShrunkMode {
  kOff,    // plain backbone
  kNaive,  // query down-sampling only
  kFull,   // query down-sampling plus two query up-sampling layers
};

std::string to_string(ShrunkMode mode);
ShrunkMode parse_shrunk_mode(const std::string& text);

struct ShrunkConfig {
  ShrunkMode mode = ShrunkMode::kOff;
  // Encoder layer after which down-sampling applies; 0 picks depth / 3.
  // Equal to depth means no shrinking at all.
  int64_t qd_layer = 0;
  int64_t qd_factor = 2;
  int64_t qu_count = 2;

  int64_t resolved_qd_layer(int64_t depth) const;
  bool active(int64_t depth) const;
  void validate(const EncoderConfig& encoder) const;
};

// Row indices of the top-left token of every factor x factor cell.
std::vector<int64_t> nearest_query_rows(int64_t grid_h, int64_t grid_w, int64_t factor);

// Transformer layer whose queries (and residual stream) are the nearest
// down-sampled grid while keys and values keep every input token.
template <typename T>
TokenSequence<T> qd_layer(const TransformerLayer<T>& layer, const TokenSequence<T>& x,
                          int64_t factor = 2, int layer_index = 0,
                          AttentionTrace<T>* trace = nullptr);

// Decoder layer whose output takes the resolution of its query grid.
template <typename T>
TokenSequence<T> qu_layer(const DecoderLayer<T>& layer, const TokenSequence<T>& queries,
                          const TokenSequence<T>& kv, AttentionTrace<T>* cross_trace = nullptr);

template <typename T>
struct ShrunkFeatures {
  std::vector<TokenSequence<T>> backbone;     // F_1 .. F_m, grids shrink after QD
  std::optional<TokenSequence<T>> qu_output;  // normalised, full mode only
  int64_t qd_layer = 0;                       // 0 when inactive
};

// Query up-sampling branch plus the QD schedule. Parameters live under
// "shrunk.".
template <typename T>
class ShrunkBranch {
 public:
  ShrunkBranch(const ShrunkConfig& config, const EncoderConfig& encoder, ParameterStore<T>& store,
               Rng& rng);

  ShrunkFeatures<T> forward(const VitEncoder<T>& encoder, const Tensor<T>& image) const;

  const ShrunkConfig& config() const { return config_; }
  const DecoderLayer<T>& qu(int index) const { return qu_.at(static_cast<size_t>(index - 1)); }
  const Tensor<T>& queries() const { return queries_; }

 private:
  ShrunkConfig config_;
  int64_t depth_ = 0;
  int64_t qd_at_ = 0;
  Tensor<T> queries_;
  std::vector<DecoderLayer<T>> qu_;
  LayerNorm<T> norm_;
};

// Encoder pass honouring the QD schedule, without any QU layers.
template <typename T>
ShrunkFeatures<T> shrunk_backbone(const VitEncoder<T>& encoder, const ShrunkConfig& config,
                                  const Tensor<T>& image);

extern template class ShrunkBranch<float>;
extern template class ShrunkBranch<double>;

}  // namespace segvit

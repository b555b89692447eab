#include "segvit/shrunk.hpp"

#include "segvit/errors.hpp"

namespace segvit {

std::string to_string(ShrunkMode mode) {
  switch (mode) {
    case ShrunkMode::kOff:
      return "off";
    case ShrunkMode::kNaive:
      return "naive";
    case ShrunkMode::kFull:
      return "full";
  }
  return "off";
}

ShrunkMode parse_shrunk_mode(const std::string& text) {
  if (text == "off") return ShrunkMode::kOff;
  if (text == "naive") return ShrunkMode::kNaive;
  if (text == "full") return ShrunkMode::kFull;
  throw ConfigError("unknown shrunk mode '" + text + "' (expected off, naive or full)");
}

int64_t ShrunkConfig::resolved_qd_layer(int64_t depth) const {
  return qd_layer == 0 ? depth / 3 : qd_layer;
}

bool ShrunkConfig::active(int64_t depth) const {
  return mode != ShrunkMode::kOff && resolved_qd_layer(depth) < depth;
}

void ShrunkConfig::validate(const EncoderConfig& encoder) const {
  if (mode == ShrunkMode::kOff) return;
  const int64_t at = resolved_qd_layer(encoder.depth);
  if (at < 1 || at > encoder.depth) {
    throw ConfigError("qd_layer " + std::to_string(at) + " outside [1, " +
                      std::to_string(encoder.depth) + "]");
  }
  if (qd_factor != 2) throw ConfigError("only a down-sampling factor of 2 is supported");
  if (qu_count != 2) throw ConfigError("the up-sampling branch has exactly 2 layers");
  if (encoder.grid_h() % qd_factor != 0 || encoder.grid_w() % qd_factor != 0) {
    throw ConfigError("patch grid " + std::to_string(encoder.grid_h()) + "x" +
                      std::to_string(encoder.grid_w()) + " is not divisible by the QD factor");
  }
}

std::vector<int64_t> nearest_query_rows(int64_t grid_h, int64_t grid_w, int64_t factor) {
  if (factor < 1 || grid_h % factor != 0 || grid_w % factor != 0) {
    throw ConfigError("grid " + std::to_string(grid_h) + "x" + std::to_string(grid_w) +
                      " cannot be down-sampled by " + std::to_string(factor));
  }
  std::vector<int64_t> rows;
  rows.reserve(static_cast<size_t>((grid_h / factor) * (grid_w / factor)));
  for (int64_t i = 0; i < grid_h / factor; ++i)
    for (int64_t j = 0; j < grid_w / factor; ++j) rows.push_back(i * factor * grid_w + j * factor);
  return rows;
}

template <typename T>
TokenSequence<T> qd_layer(const TransformerLayer<T>& layer, const TokenSequence<T>& x,
                          int64_t factor, int layer_index, AttentionTrace<T>* trace) {
  x.validate();
  const auto rows = nearest_query_rows(x.grid_h, x.grid_w, factor);
  return {layer.with_query_rows(x.tokens, rows, trace), x.grid_h / factor, x.grid_w / factor,
          layer_index};
}

template <typename T>
TokenSequence<T> qu_layer(const DecoderLayer<T>& layer, const TokenSequence<T>& queries,
                          const TokenSequence<T>& kv, AttentionTrace<T>* cross_trace) {
  queries.validate();
  kv.validate();
  if (queries.width() != kv.width()) {
    throw ConfigError("QU width mismatch: queries " + std::to_string(queries.width()) + ", kv " +
                      std::to_string(kv.width()));
  }
  return {layer(queries.tokens, kv.tokens, cross_trace), queries.grid_h, queries.grid_w,
          kv.source_layer};
}

template <typename T>
ShrunkFeatures<T> shrunk_backbone(const VitEncoder<T>& encoder, const ShrunkConfig& config,
                                  const Tensor<T>& image) {
  const EncoderConfig& ec = encoder.config();
  config.validate(ec);
  ShrunkFeatures<T> out;
  const bool active = config.active(ec.depth);
  out.qd_layer = active ? config.resolved_qd_layer(ec.depth) : 0;
  TokenSequence<T> x = encoder.patchify(image);
  for (int i = 1; i <= ec.depth; ++i) {
    if (active && i == out.qd_layer + 1) {
      x = qd_layer(encoder.layer(i), x, config.qd_factor, i);
    } else {
      x = encoder.apply_layer(i, x);
    }
    out.backbone.push_back(x);
  }
  return out;
}

template <typename T>
ShrunkBranch<T>::ShrunkBranch(const ShrunkConfig& config, const EncoderConfig& encoder,
                              ParameterStore<T>& store, Rng& rng)
    : config_(config), depth_(encoder.depth) {
  config_.validate(encoder);
  if (!config_.active(depth_)) return;
  qd_at_ = config_.resolved_qd_layer(depth_);
  if (config_.mode != ShrunkMode::kFull) return;
  queries_ = store.add("shrunk.queries", {encoder.tokens(), encoder.width}, Init::kNormal, rng);
  for (int64_t i = 1; i <= config_.qu_count; ++i) {
    qu_.emplace_back(store, "shrunk.qu" + std::to_string(i) + ".", encoder.width, encoder.heads,
                     encoder.mlp_ratio, rng);
  }
  norm_ = LayerNorm<T>(store, "shrunk.norm.", encoder.width, rng);
}

template <typename T>
ShrunkFeatures<T> ShrunkBranch<T>::forward(const VitEncoder<T>& encoder,
                                           const Tensor<T>& image) const {
  ShrunkFeatures<T> out = shrunk_backbone(encoder, config_, image);
  if (qu_.empty()) return out;
  const EncoderConfig& ec = encoder.config();
  // QU-1: learnable full-resolution queries against the last pre-QD features.
  const TokenSequence<T> low = encoder.output_norm(out.backbone[static_cast<size_t>(qd_at_ - 1)]);
  const TokenSequence<T> learnable{queries_, ec.grid_h(), ec.grid_w(), 0};
  TokenSequence<T> up = qu_layer(qu_[0], learnable, low);
  // QU-2: those tokens query the down-sampled output of the last layer.
  const TokenSequence<T> deep = encoder.output_norm(out.backbone.back());
  up = qu_layer(qu_[1], up, deep);
  out.qu_output = TokenSequence<T>{norm_(up.tokens), up.grid_h, up.grid_w,
                                   static_cast<int>(ec.depth)};
  return out;
}

#define SEGVIT_INSTANTIATE_SHRUNK(T)                                                            \
  template TokenSequence<T> qd_layer(const TransformerLayer<T>&, const TokenSequence<T>&,       \
                                     int64_t, int, AttentionTrace<T>*);                         \
  template TokenSequence<T> qu_layer(const DecoderLayer<T>&, const TokenSequence<T>&,           \
                                     const TokenSequence<T>&, AttentionTrace<T>*);              \
  template ShrunkFeatures<T> shrunk_backbone(const VitEncoder<T>&, const ShrunkConfig&,         \
                                             const Tensor<T>&);                                 \
  template class ShrunkBranch<T>;

SEGVIT_INSTANTIATE_SHRUNK(float)
SEGVIT_INSTANTIATE_SHRUNK(double)

}  // namespace segvit

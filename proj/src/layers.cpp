#include "segvit/layers.hpp"

#include <cmath>

#include "segvit/errors.hpp"

namespace segvit {

template <typename T>
Linear<T>::Linear(ParameterStore<T>& store, const std::string& prefix, const std::string& name,
                  int64_t in, int64_t out, Rng& rng)
    : weight(store.add(prefix + name + "_weight", {in, out}, Init::kTruncNormal, rng)),
      bias(store.add(prefix + name + "_bias", {out}, Init::kZeros, rng)) {}

template <typename T>
LayerNorm<T>::LayerNorm(ParameterStore<T>& store, const std::string& prefix, int64_t width,
                        Rng& rng)
    : gamma(store.add(prefix + "gamma", {width}, Init::kOnes, rng)),
      beta(store.add(prefix + "beta", {width}, Init::kZeros, rng)) {}

template <typename T>
MultiHeadAttention<T>::MultiHeadAttention(ParameterStore<T>& store, const std::string& prefix,
                                          int64_t width, int64_t heads, Rng& rng)
    : q_(store, prefix, "q", width, width, rng),
      k_(store, prefix, "k", width, width, rng),
      v_(store, prefix, "v", width, width, rng),
      o_(store, prefix, "o", width, width, rng),
      heads_(heads) {
  if (heads <= 0 || width % heads != 0) {
    throw ConfigError("width " + std::to_string(width) + " is not divisible by " +
                      std::to_string(heads) + " heads");
  }
}

template <typename T>
Tensor<T> MultiHeadAttention<T>::operator()(const Tensor<T>& query_in, const Tensor<T>& kv_in,
                                            AttentionTrace<T>* trace) const {
  if (query_in.rank() != 2 || kv_in.rank() != 2 || query_in.dim(1) != kv_in.dim(1)) {
    throw ConfigError("attention width mismatch: queries " + shape_str(query_in.shape()) +
                      ", keys/values " + shape_str(kv_in.shape()));
  }
  const auto q = split_heads(q_(query_in), heads_);
  const auto k = split_heads(k_(kv_in), heads_);
  const auto v = split_heads(v_(kv_in), heads_);
  const T d_k = static_cast<T>(q.dim(2));
  const auto sim = scale(matmul(q, transpose(k)), T(1) / std::sqrt(d_k));
  const auto weights = softmax(sim, -1);
  if (trace) {
    trace->similarity = sim;
    trace->weights = weights;
  }
  return o_(merge_heads(matmul(weights, v)));
}

template <typename T>
Mlp<T>::Mlp(ParameterStore<T>& store, const std::string& prefix, int64_t width, int64_t ratio,
            Rng& rng)
    : fc1_(store, prefix, "fc1", width, width * ratio, rng),
      fc2_(store, prefix, "fc2", width * ratio, width, rng) {}

template <typename T>
TransformerLayer<T>::TransformerLayer(ParameterStore<T>& store, const std::string& prefix,
                                      int64_t width, int64_t heads, int64_t mlp_ratio, Rng& rng)
    : ln1_(store, prefix + "ln1.", width, rng),
      ln2_(store, prefix + "ln2.", width, rng),
      attn_(store, prefix + "attn.", width, heads, rng),
      mlp_(store, prefix + "mlp.", width, mlp_ratio, rng) {}

template <typename T>
Tensor<T> TransformerLayer<T>::operator()(const Tensor<T>& x) const {
  const auto h = ln1_(x);
  const auto x1 = add(x, attn_(h, h));
  return add(x1, mlp_(ln2_(x1)));
}

template <typename T>
Tensor<T> TransformerLayer<T>::with_query_rows(const Tensor<T>& x,
                                               const std::vector<int64_t>& query_rows,
                                               AttentionTrace<T>* trace) const {
  const auto h = ln1_(x);
  const auto x1 = add(gather_rows(x, query_rows), attn_(gather_rows(h, query_rows), h, trace));
  return add(x1, mlp_(ln2_(x1)));
}

template <typename T>
DecoderLayer<T>::DecoderLayer(ParameterStore<T>& store, const std::string& prefix, int64_t width,
                              int64_t heads, int64_t mlp_ratio, Rng& rng)
    : ln_self_(store, prefix + "ln_self.", width, rng),
      ln_cross_(store, prefix + "ln_cross.", width, rng),
      ln_mlp_(store, prefix + "ln_mlp.", width, rng),
      self_attn_(store, prefix + "self_attn.", width, heads, rng),
      cross_attn_(store, prefix + "cross_attn.", width, heads, rng),
      mlp_(store, prefix + "mlp.", width, mlp_ratio, rng) {}

template <typename T>
Tensor<T> DecoderLayer<T>::operator()(const Tensor<T>& queries, const Tensor<T>& memory,
                                      AttentionTrace<T>* cross_trace) const {
  const auto h = ln_self_(queries);
  const auto q1 = add(queries, self_attn_(h, h));
  const auto q2 = add(q1, cross_attn_(ln_cross_(q1), memory, cross_trace));
  return add(q2, mlp_(ln_mlp_(q2)));
}

#define SEGVIT_INSTANTIATE_LAYERS(T) \
  template struct Linear<T>;         \
  template struct LayerNorm<T>;      \
  template class MultiHeadAttention<T>; \
  template class Mlp<T>;             \
  template class TransformerLayer<T>; \
  template class DecoderLayer<T>;

SEGVIT_INSTANTIATE_LAYERS(float)
SEGVIT_INSTANTIATE_LAYERS(double)

}  // namespace segvit

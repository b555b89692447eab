#pragma once

#include <cstdint>
#include <string>

#include "segvit/ops.hpp"
#include "segvit/params.hpp"

namespace segvit {

template <typename T>
struct Linear {
  Tensor<T> weight;  // [in, out]
  Tensor<T> bias;    // [out]

  Linear() = default;
  // Registers "<prefix><name>_weight" and "<prefix><name>_bias".
  Linear(ParameterStore<T>& store, const std::string& prefix, const std::string& name,
         int64_t in, int64_t out, Rng& rng);
  Tensor<T> operator()(const Tensor<T>& x) const { return linear(x, weight, bias); }
};

template <typename T>
struct LayerNorm {
  Tensor<T> gamma;
  Tensor<T> beta;

  LayerNorm() = default;
  LayerNorm(ParameterStore<T>& store, const std::string& prefix, int64_t width, Rng& rng);
  Tensor<T> operator()(const Tensor<T>& x) const { return layer_norm(x, gamma, beta); }
};

// Intermediate tensors of one attention call, exposed for the mask branch and
// for tests.
template <typename T>
struct AttentionTrace {
  Tensor<T> similarity;  // [H, N, L], already scaled by 1/sqrt(d_k)
  Tensor<T> weights;     // softmax(similarity) over L
};

template <typename T>
class MultiHeadAttention {
 public:
  MultiHeadAttention() = default;
  MultiHeadAttention(ParameterStore<T>& store, const std::string& prefix, int64_t width,
                     int64_t heads, Rng& rng);

  // Queries come from `query_in` [N, C]; keys and values from `kv_in` [L, C].
  Tensor<T> operator()(const Tensor<T>& query_in, const Tensor<T>& kv_in,
                       AttentionTrace<T>* trace = nullptr) const;

  int64_t heads() const { return heads_; }
  const Linear<T>& value_proj() const { return v_; }

 private:
  Linear<T> q_, k_, v_, o_;
  int64_t heads_ = 1;
};

template <typename T>
class Mlp {
 public:
  Mlp() = default;
  Mlp(ParameterStore<T>& store, const std::string& prefix, int64_t width, int64_t ratio, Rng& rng);
  Tensor<T> operator()(const Tensor<T>& x) const { return fc2_(gelu(fc1_(x))); }

 private:
  Linear<T> fc1_, fc2_;
};

// Pre-norm encoder layer: x + MHSA(LN(x)), then + MLP(LN(.)).
template <typename T>
class TransformerLayer {
 public:
  TransformerLayer() = default;
  TransformerLayer(ParameterStore<T>& store, const std::string& prefix, int64_t width,
                   int64_t heads, int64_t mlp_ratio, Rng& rng);

  Tensor<T> operator()(const Tensor<T>& x) const;
  // Same layer with only the rows in `query_rows` used as queries (and as the
  // residual stream); keys and values still see every token.
  Tensor<T> with_query_rows(const Tensor<T>& x, const std::vector<int64_t>& query_rows,
                            AttentionTrace<T>* trace = nullptr) const;

 private:
  LayerNorm<T> ln1_, ln2_;
  MultiHeadAttention<T> attn_;
  Mlp<T> mlp_;
};

// Pre-norm decoder layer: self-attention over queries, cross-attention from
// queries to memory, MLP. Memory is used as given.
template <typename T>
class DecoderLayer {
 public:
  DecoderLayer() = default;
  DecoderLayer(ParameterStore<T>& store, const std::string& prefix, int64_t width, int64_t heads,
               int64_t mlp_ratio, Rng& rng);

  Tensor<T> operator()(const Tensor<T>& queries, const Tensor<T>& memory,
                       AttentionTrace<T>* cross_trace = nullptr) const;

  const MultiHeadAttention<T>& cross_attention() const { return cross_attn_; }

 private:
  LayerNorm<T> ln_self_, ln_cross_, ln_mlp_;
  MultiHeadAttention<T> self_attn_, cross_attn_;
  Mlp<T> mlp_;
};

}  // namespace segvit

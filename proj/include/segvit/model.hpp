#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <vector>

#include "segvit/atm_decoder.hpp"
#include "segvit/encoder.hpp"
#include "segvit/shrunk.hpp"

namespace segvit {

struct ModelConfig {
  EncoderConfig encoder;
  DecoderConfig decoder;
  ShrunkConfig shrunk;

  void validate() const;
};

template <typename T>
struct ModelOutput {
  ShrunkFeatures<T> features;
  std::vector<TokenSequence<T>> stage_features;  // what each cascade stage consumed
  CascadeOutput<T> cascade;
};

// Encoder (plain or Shrunk) followed by the ATM cascade. Parameter
// registration order is encoder, shrunk branch, decoder, all drawn from one
// generator seeded with `seed`.
template <typename T>
class SegVitModel {
 public:
  SegVitModel(const ModelConfig& config, uint64_t seed);

  ModelOutput<T> forward(const Tensor<T>& image) const;
  // Per-stage decoder inputs: stage 1 first, each normalised. In full Shrunk
  // mode the deepest layer is replaced by the up-sampled branch output.
  std::vector<TokenSequence<T>> stage_features(const ShrunkFeatures<T>& features) const;

  ParameterStore<T>& params() { return store_; }
  const ParameterStore<T>& params() const { return store_; }
  const VitEncoder<T>& encoder() const { return *encoder_; }
  const ShrunkBranch<T>& shrunk() const { return *shrunk_; }
  const AtmDecoder<T>& decoder() const { return *decoder_; }
  const ModelConfig& config() const { return config_; }

 private:
  ModelConfig config_;
  ParameterStore<T> store_;
  std::unique_ptr<VitEncoder<T>> encoder_;
  std::unique_ptr<ShrunkBranch<T>> shrunk_;
  std::unique_ptr<AtmDecoder<T>> decoder_;
};

extern template class SegVitModel<float>;
extern template class SegVitModel<double>;

}  // namespace segvit

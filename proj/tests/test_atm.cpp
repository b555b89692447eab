#include <algorithm>
#include <numeric>

#include "doctest.h"
#include "fixtures.hpp"
#include "oracles.hpp"
#include "segvit/atm_decoder.hpp"
#include "segvit/errors.hpp"
#include "segvit/model.hpp"

using namespace segvit;
using T = Tensor<double>;

namespace {

TokenSequence<double> features(int64_t gh, int64_t gw, int64_t c, uint64_t seed) {
  return {fixture::random_tensor({gh * gw, c}, seed), gh, gw, 0};
}

}  // namespace

TEST_CASE("ATM block shapes") {
  Rng rng(1);
  ParameterStore<double> store;
  AtmBlock<double> atm(store, "atm.", 8, 1, 2, rng);
  const auto out = atm(fixture::random_tensor({150, 8}, 2), features(32, 32, 8, 3));
  CHECK(out.trace.similarity.shape() == Shape{1, 150, 1024});
  CHECK(out.mask_logits.shape() == Shape{150, 32, 32});
  CHECK(out.tokens.shape() == Shape{150, 8});
}

TEST_CASE("ATM block on a 2-class, 4-token toy matches the explicit loop") {
  for (int64_t heads : {1, 2}) {
    CAPTURE(heads);
    Rng rng(4);
    ParameterStore<double> store;
    AtmBlock<double> atm(store, "atm.", 4, heads, 2, rng);
    fixture::scramble(store, 5);
    const T g = fixture::random_tensor({2, 4}, 6);
    const auto f = features(2, 2, 4, 7);
    const auto out = atm(g, f);

    const auto ref = oracle::decoder_layer(oracle::Params{store}, "atm.", oracle::from_tensor(g),
                                           oracle::from_tensor(f.tokens), heads);
    CHECK(oracle::max_abs_diff(oracle::vec(out.tokens), ref.out.v) < 1e-10);
    CHECK(oracle::max_abs_diff(oracle::vec(out.mask_logits), oracle::head_sum(ref.cross.similarity).v) <
          1e-10);
    std::vector<double> sims;
    for (const auto& s : ref.cross.similarity) sims.insert(sims.end(), s.v.begin(), s.v.end());
    CHECK(oracle::max_abs_diff(oracle::vec(out.trace.similarity), sims) < 1e-10);
  }
}

TEST_CASE("mask and attention branches consume one similarity tensor") {
  Rng rng(8);
  ParameterStore<double> store;
  AtmBlock<double> atm(store, "atm.", 8, 2, 2, rng);
  const auto out = atm(fixture::random_tensor({3, 8}, 9), features(2, 3, 8, 10));
  const auto& sim = out.trace.similarity;
  // softmax(similarity) -> weights
  REQUIRE(out.trace.weights.node_ptr()->inputs.size() == 1);
  CHECK(out.trace.weights.node_ptr()->inputs[0] == sim.node_ptr());
  // reshape(sum_axis(similarity)) -> mask logits
  const auto& reshape_in = out.mask_logits.node_ptr()->inputs;
  REQUIRE(reshape_in.size() == 1);
  REQUIRE(reshape_in[0]->inputs.size() == 1);
  CHECK(reshape_in[0]->inputs[0] == sim.node_ptr());

  // Head-summed similarity is the mask input, bitwise.
  const auto s = sim.data();
  const auto m = out.mask_logits.data();
  for (int64_t i = 0; i < 18; ++i) CHECK(m[i] == s[i] + s[18 + i]);
}

TEST_CASE("zero similarity") {
  Rng rng(11);
  ParameterStore<double> store;
  MultiHeadAttention<double> attn(store, "a.", 4, 1, rng);
  fixture::scramble(store, 12);
  fixture::zero_prefix(store, "a.q_");
  const T kv = fixture::random_tensor({5, 4}, 13);
  AttentionTrace<double> trace;
  const auto out = attn(fixture::random_tensor({2, 4}, 14), kv, &trace);
  for (double v : oracle::vec(sigmoid(trace.similarity))) CHECK(v == 0.5);
  for (double v : oracle::vec(trace.weights)) CHECK(v == doctest::Approx(0.2).epsilon(1e-15));

  const oracle::Params p{store};
  const auto v = p.lin(oracle::from_tensor(kv), "a.v");
  oracle::Mat mean_v(1, 4);
  for (int64_t j = 0; j < 5; ++j)
    for (int64_t c = 0; c < 4; ++c) mean_v(0, c) += v(j, c) / 5.0;
  const auto expect = p.lin(mean_v, "a.o");
  const auto got = oracle::vec(out);
  for (int64_t r = 0; r < 2; ++r)
    for (int64_t c = 0; c < 4; ++c) CHECK(std::abs(got[r * 4 + c] - expect(0, c)) < 1e-12);
}

TEST_CASE("cascade decode") {
  Rng rng(20);
  const auto mc = fixture::model(fixture::encoder(16, 4, 12, 8, 2), {6, 8, 12}, 3);
  SegVitModel<double> model(mc, 21);
  fixture::scramble(model.params(), 22, 0.2);
  const auto out = model.forward(fixture::random_tensor({16, 16, 3}, 23));
  REQUIRE(out.cascade.class_logits.size() == 3);
  CHECK(out.cascade.stage_mask_logits.size() == 3);
  CHECK(out.cascade.cumulative_mask_logits.size() == 3);
  // Stage 1 reads the deepest selected layer.
  CHECK(out.stage_features[0].source_layer == 12);
  CHECK(out.stage_features[1].source_layer == 8);
  CHECK(out.stage_features[2].source_layer == 6);
  for (const auto& l : out.cascade.class_logits) CHECK(l.shape() == Shape{3, 4});

  SUBCASE("cumulative masks are exact running sums") {
    std::vector<double> running(static_cast<size_t>(3 * 16), 0.0);
    for (size_t s = 0; s < 3; ++s) {
      const auto st = oracle::vec(out.cascade.stage_mask_logits[s]);
      for (size_t i = 0; i < running.size(); ++i) running[i] += st[i];
      CHECK(oracle::vec(out.cascade.cumulative_mask_logits[s]) == running);
    }
  }

  SUBCASE("attention rows are distributions and masks lie in (0, 1)") {
    for (const auto& tr : out.cascade.traces) {
      const auto w = tr.weights.data();
      const int64_t l = tr.weights.dim(2);
      for (int64_t r = 0; r < tr.weights.numel() / l; ++r) {
        double s = 0;
        for (int64_t j = 0; j < l; ++j) s += w[r * l + j];
        CHECK(std::abs(s - 1.0) < 1e-6);
      }
    }
    for (double p : oracle::vec(sigmoid(out.cascade.final_mask_logits()))) {
      CHECK(p > 0.0);
      CHECK(p < 1.0);
    }
  }

  SUBCASE("permuting class tokens permutes masks and logits") {
    const std::vector<int64_t> perm = {2, 0, 1};
    const auto g = model.decoder().class_embeddings();
    const auto permuted = model.decoder().decode(gather_rows(g, perm), out.stage_features);
    const auto m0 = oracle::vec(out.cascade.final_mask_logits());
    const auto m1 = oracle::vec(permuted.final_mask_logits());
    const auto l0 = oracle::vec(out.cascade.final_logits());
    const auto l1 = oracle::vec(permuted.final_logits());
    for (int64_t r = 0; r < 3; ++r) {
      for (int64_t i = 0; i < 16; ++i) CHECK(std::abs(m1[r * 16 + i] - m0[perm[r] * 16 + i]) < 1e-12);
      for (int64_t j = 0; j < 4; ++j) CHECK(std::abs(l1[r * 4 + j] - l0[perm[r] * 4 + j]) < 1e-12);
    }
  }
}

TEST_CASE("single-stage selection is one ATM block plus its head") {
  const auto mc = fixture::model(fixture::encoder(8, 4, 2, 8, 2), {2}, 3);
  SegVitModel<double> model(mc, 30);
  fixture::scramble(model.params(), 31, 0.2);
  const T image = fixture::random_tensor({8, 8, 3}, 32);
  const auto out = model.forward(image);

  const oracle::Params p{model.params()};
  const auto f2 = model.encoder().output_norm(model.encoder().encode(image)[1]);
  const auto ref = oracle::decoder_layer(p, "decoder.stage1.atm.",
                                         oracle::from_tensor(model.decoder().class_embeddings()),
                                         oracle::from_tensor(f2.tokens), 2);
  const auto logits = p.lin(p.ln(ref.out, "decoder.stage1.norm."), "decoder.stage1.cls");
  CHECK(oracle::max_abs_diff(oracle::vec(out.cascade.final_logits()), logits.v) < 1e-10);
  CHECK(oracle::max_abs_diff(oracle::vec(out.cascade.final_mask_logits()),
                             oracle::head_sum(ref.cross.similarity).v) < 1e-10);
}

TEST_CASE("zeroed second stage adds nothing to the cumulative mask") {
  const auto mc = fixture::model(fixture::encoder(8, 4, 2, 8, 2), {1, 2}, 2);
  SegVitModel<double> model(mc, 40);
  fixture::scramble(model.params(), 41, 0.2);
  fixture::zero_prefix(model.params(), "decoder.stage2.atm.");
  const auto out = model.forward(fixture::random_tensor({8, 8, 3}, 42));
  CHECK(oracle::vec(out.cascade.cumulative_mask_logits[1]) ==
        oracle::vec(out.cascade.stage_mask_logits[0]));
}

TEST_CASE("decoder configuration errors") {
  DecoderConfig d;
  d.cascade_layers = {3, 2};
  CHECK_THROWS_AS(d.validate(4), ConfigError);
  d.cascade_layers = {2, 5};
  CHECK_THROWS_AS(d.validate(4), ConfigError);
  d.cascade_layers = {};
  CHECK_THROWS_AS(d.validate(4), ConfigError);
  d.cascade_layers = {4};
  d.num_classes = 1;
  CHECK_THROWS_AS(d.validate(4), ConfigError);
}

TEST_CASE("semantic inference") {
  SUBCASE("certain class with a full mask wins everywhere") {
    std::vector<double> logits(3 * 4, -50.0);
    logits[1 * 4 + 1] = 50.0;
    std::vector<double> masks(3 * 4, 0.0);
    for (int i = 0; i < 4; ++i) masks[4 + i] = 1.0;
    const auto lm = semantic_inference(T::from_data({3, 4}, logits), T::from_data({3, 2, 2}, masks));
    for (uint8_t v : lm.labels) CHECK(v == 1);
  }

  SUBCASE("random inputs against a per-pixel argmax") {
    const T logits = fixture::random_tensor({3, 4}, 50, -3, 3);
    const T probs = fixture::random_tensor({3, 5, 6}, 51, 0, 1);
    const auto lm = semantic_inference(logits, probs);
    const auto lg = oracle::vec(logits);
    std::vector<double> cls(3);
    for (int c = 0; c < 3; ++c) {
      double z = 0;
      for (int j = 0; j < 4; ++j) z += std::exp(lg[c * 4 + j]);
      cls[c] = std::exp(lg[c * 4 + c]) / z;
    }
    const auto pm = oracle::vec(probs);
    for (double factor : {1.0, 3.7, 0.01}) {
      for (int px = 0; px < 30; ++px) {
        int best = 0;
        for (int c = 1; c < 3; ++c) {
          if (factor * cls[c] * pm[c * 30 + px] > factor * cls[best] * pm[best * 30 + px]) best = c;
        }
        CHECK(lm.labels[px] == best);
      }
    }
  }

  CHECK_THROWS_AS(semantic_inference(T::zeros({3, 3}), T::zeros({3, 2, 2})), DimensionError);
}

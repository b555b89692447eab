#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "segvit/model.hpp"

namespace segvit {

// Analytic multiply-accumulate counts. One MAC counts as one FLOP, the
// convention of common FLOP counters; norms, activations, softmax and
// interpolation are not counted.

// Linear layer on `rows` tokens.
constexpr uint64_t linear_macs(uint64_t rows, uint64_t in, uint64_t out) { return rows * in * out; }

struct AttentionCost {
  uint64_t qkv = 0;           // query, key and value projections
  uint64_t scores = 0;        // Q K^T
  uint64_t weighted_sum = 0;  // softmax(S) V
  uint64_t proj = 0;          // output projection
  uint64_t total() const { return qkv + scores + weighted_sum + proj; }
};

// Multi-head attention with `queries` query tokens over `keys` key tokens.
AttentionCost attention_macs(uint64_t queries, uint64_t keys, uint64_t width);

struct LayerCost {
  std::string name;  // "layer7", "qd9", "qu1", "atm.stage2"
  int64_t queries = 0;
  int64_t keys = 0;
  AttentionCost self_attn;   // zero for encoder layers' cross part
  AttentionCost cross_attn;  // encoder layers put their attention here
  uint64_t mlp = 0;
  uint64_t total() const { return self_attn.total() + cross_attn.total() + mlp; }
};

struct CostBreakdown {
  uint64_t patch_embed = 0;
  std::vector<LayerCost> backbone;  // encoder layers, QD included
  std::vector<LayerCost> qu;
  std::vector<LayerCost> decoder;   // one per ATM stage
  uint64_t class_heads = 0;

  uint64_t backbone_total() const;  // patch embedding + encoder layers
  uint64_t qu_total() const;
  uint64_t decoder_total() const;   // ATM blocks + class heads
  uint64_t total() const;
  // Flat (component, MACs) list whose values sum exactly to total().
  std::vector<std::pair<std::string, uint64_t>> components() const;
};

// Costs for a crop of crop_h x crop_w pixels. Architecture (including the
// Shrunk schedule) comes from `config`; its image size is ignored.
CostBreakdown estimate(const ModelConfig& config, int64_t crop_h, int64_t crop_w);

// Closed form for one plain encoder layer on `tokens` tokens.
uint64_t plain_layer_macs(uint64_t tokens, uint64_t width, uint64_t mlp_ratio);

struct CostComparison {
  CostBreakdown plain;
  CostBreakdown shrunk;
  double ratio = 0.0;  // shrunk / plain
  std::vector<std::pair<std::string, int64_t>> deltas;  // shrunk - plain per component
};

CostComparison compare(const ModelConfig& plain, const ModelConfig& shrunk, int64_t crop_h,
                       int64_t crop_w);

// Aligned text table; with `key_values` also appends "key=value" lines.
std::string format_breakdown(const CostBreakdown& cost, bool key_values);

}  // namespace segvit

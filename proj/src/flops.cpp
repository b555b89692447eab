#include "segvit/flops.hpp"

#include <cstdio>
#include <map>
#include <sstream>

#include "segvit/errors.hpp"

namespace segvit {

AttentionCost attention_macs(uint64_t queries, uint64_t keys, uint64_t width) {
  AttentionCost c;
  c.qkv = linear_macs(queries, width, width) + 2 * linear_macs(keys, width, width);
  c.scores = queries * keys * width;
  c.weighted_sum = queries * keys * width;
  c.proj = linear_macs(queries, width, width);
  return c;
}

uint64_t plain_layer_macs(uint64_t tokens, uint64_t width, uint64_t mlp_ratio) {
  const uint64_t l = tokens, c = width;
  return l * 3 * c * c + 2 * l * l * c + l * c * c + 2 * l * c * (mlp_ratio * c);
}

namespace {

uint64_t mlp_macs(uint64_t tokens, uint64_t width, uint64_t ratio) {
  return linear_macs(tokens, width, width * ratio) + linear_macs(tokens, width * ratio, width);
}

LayerCost encoder_layer(std::string name, uint64_t queries, uint64_t keys, uint64_t width,
                        uint64_t ratio) {
  LayerCost lc;
  lc.name = std::move(name);
  lc.queries = static_cast<int64_t>(queries);
  lc.keys = static_cast<int64_t>(keys);
  lc.cross_attn = attention_macs(queries, keys, width);
  lc.mlp = mlp_macs(queries, width, ratio);
  return lc;
}

LayerCost decoder_layer(std::string name, uint64_t queries, uint64_t memory, uint64_t width,
                        uint64_t ratio) {
  LayerCost lc;
  lc.name = std::move(name);
  lc.queries = static_cast<int64_t>(queries);
  lc.keys = static_cast<int64_t>(memory);
  lc.self_attn = attention_macs(queries, queries, width);
  lc.cross_attn = attention_macs(queries, memory, width);
  lc.mlp = mlp_macs(queries, width, ratio);
  return lc;
}

uint64_t sum_layers(const std::vector<LayerCost>& layers) {
  uint64_t s = 0;
  for (const auto& l : layers) s += l.total();
  return s;
}

}  // namespace

uint64_t CostBreakdown::backbone_total() const { return patch_embed + sum_layers(backbone); }
uint64_t CostBreakdown::qu_total() const { return sum_layers(qu); }
uint64_t CostBreakdown::decoder_total() const { return sum_layers(decoder) + class_heads; }
uint64_t CostBreakdown::total() const { return backbone_total() + qu_total() + decoder_total(); }

std::vector<std::pair<std::string, uint64_t>> CostBreakdown::components() const {
  std::vector<std::pair<std::string, uint64_t>> out;
  out.emplace_back("patch_embed", patch_embed);
  auto emit = [&](const LayerCost& l) {
    if (l.self_attn.total() > 0) {
      out.emplace_back(l.name + ".self_attn.qkv", l.self_attn.qkv);
      out.emplace_back(l.name + ".self_attn.scores", l.self_attn.scores);
      out.emplace_back(l.name + ".self_attn.weighted_sum", l.self_attn.weighted_sum);
      out.emplace_back(l.name + ".self_attn.proj", l.self_attn.proj);
    }
    const std::string attn = l.self_attn.total() > 0 ? ".cross_attn" : ".attn";
    out.emplace_back(l.name + attn + ".qkv", l.cross_attn.qkv);
    out.emplace_back(l.name + attn + ".scores", l.cross_attn.scores);
    out.emplace_back(l.name + attn + ".weighted_sum", l.cross_attn.weighted_sum);
    out.emplace_back(l.name + attn + ".proj", l.cross_attn.proj);
    out.emplace_back(l.name + ".mlp", l.mlp);
  };
  for (const auto& l : backbone) emit(l);
  for (const auto& l : qu) emit(l);
  for (const auto& l : decoder) emit(l);
  out.emplace_back("class_heads", class_heads);
  return out;
}

CostBreakdown estimate(const ModelConfig& config, int64_t crop_h, int64_t crop_w) {
  ModelConfig cfg = config;
  cfg.encoder.image_height = crop_h;
  cfg.encoder.image_width = crop_w;
  cfg.validate();
  const EncoderConfig& e = cfg.encoder;
  const uint64_t c = static_cast<uint64_t>(e.width);
  const uint64_t r = static_cast<uint64_t>(e.mlp_ratio);
  const uint64_t full = static_cast<uint64_t>(e.tokens());
  const bool shrink = cfg.shrunk.active(e.depth);
  const int64_t qd = shrink ? cfg.shrunk.resolved_qd_layer(e.depth) : e.depth;
  const uint64_t factor = static_cast<uint64_t>(cfg.shrunk.qd_factor);
  const uint64_t reduced = full / (factor * factor);

  CostBreakdown out;
  out.patch_embed = linear_macs(full, static_cast<uint64_t>(e.patch_dim()), c);
  for (int64_t i = 1; i <= e.depth; ++i) {
    if (i <= qd) {
      out.backbone.push_back(encoder_layer("layer" + std::to_string(i), full, full, c, r));
    } else if (i == qd + 1) {
      out.backbone.push_back(encoder_layer("qd" + std::to_string(i), reduced, full, c, r));
    } else {
      out.backbone.push_back(encoder_layer("layer" + std::to_string(i), reduced, reduced, c, r));
    }
  }
  const bool with_qu = shrink && cfg.shrunk.mode == ShrunkMode::kFull;
  if (with_qu) {
    out.qu.push_back(decoder_layer("qu1", full, full, c, r));
    out.qu.push_back(decoder_layer("qu2", full, reduced, c, r));
  }
  const DecoderConfig& d = cfg.decoder;
  const uint64_t n = static_cast<uint64_t>(d.num_classes);
  for (int64_t s = 1; s <= d.stages(); ++s) {
    const int layer = d.layer_for_stage(s);
    uint64_t tokens = layer <= qd ? full : reduced;
    if (with_qu && layer == e.depth) tokens = full;
    out.decoder.push_back(decoder_layer("atm.stage" + std::to_string(s), n, tokens, c,
                                        static_cast<uint64_t>(d.mlp_ratio)));
  }
  out.class_heads = static_cast<uint64_t>(d.stages()) * linear_macs(n, c, n + 1);
  return out;
}

CostComparison compare(const ModelConfig& plain, const ModelConfig& shrunk, int64_t crop_h,
                       int64_t crop_w) {
  CostComparison cmp;
  cmp.plain = estimate(plain, crop_h, crop_w);
  cmp.shrunk = estimate(shrunk, crop_h, crop_w);
  cmp.ratio = static_cast<double>(cmp.shrunk.total()) / static_cast<double>(cmp.plain.total());
  auto grouped = [](const CostBreakdown& b) {
    std::map<std::string, int64_t> g;
    g["patch_embed"] = static_cast<int64_t>(b.patch_embed);
    for (const auto& l : b.backbone) {
      g[l.name.rfind("qd", 0) == 0 ? "qd" : "backbone_layers"] += static_cast<int64_t>(l.total());
    }
    g["qu"] = static_cast<int64_t>(b.qu_total());
    g["atm"] = static_cast<int64_t>(b.decoder_total() - b.class_heads);
    g["class_heads"] = static_cast<int64_t>(b.class_heads);
    g["qd"] += 0;
    return g;
  };
  const auto a = grouped(cmp.plain);
  const auto b = grouped(cmp.shrunk);
  for (const auto& [name, v] : b) cmp.deltas.emplace_back(name, v - a.at(name));
  cmp.deltas.emplace_back("total", static_cast<int64_t>(cmp.shrunk.total()) -
                                       static_cast<int64_t>(cmp.plain.total()));
  return cmp;
}

std::string format_breakdown(const CostBreakdown& cost, bool key_values) {
  std::ostringstream os;
  char line[512];
  auto g = [](uint64_t v) { return static_cast<double>(v) / 1e9; };
  std::snprintf(line, sizeof line, "%-12s %7s %7s %10s %10s %10s %10s %10s %11s\n", "component",
                "queries", "keys", "self_attn", "qkv", "scores", "wsum", "proj", "mlp");
  os << line;
  std::snprintf(line, sizeof line, "%-12s %7s %7s %10s %10s %10s %10s %10s %11s\n", "", "", "",
                "(GMAC)", "(GMAC)", "(GMAC)", "(GMAC)", "(GMAC)", "(GMAC)");
  os << line;
  auto row = [&](const LayerCost& l) {
    std::snprintf(line, sizeof line, "%-12s %7lld %7lld %10.4f %10.4f %10.4f %10.4f %10.4f %11.4f\n",
                  l.name.c_str(), static_cast<long long>(l.queries),
                  static_cast<long long>(l.keys), g(l.self_attn.total()), g(l.cross_attn.qkv),
                  g(l.cross_attn.scores), g(l.cross_attn.weighted_sum), g(l.cross_attn.proj),
                  g(l.mlp));
    os << line;
  };
  for (const auto& l : cost.backbone) row(l);
  for (const auto& l : cost.qu) row(l);
  for (const auto& l : cost.decoder) row(l);
  std::snprintf(line, sizeof line,
                "\npatch_embed  %12.4f G\nbackbone     %12.4f G\nqu           %12.4f G\n"
                "decoder      %12.4f G\nclass_heads  %12.4f G\ntotal        %12.4f G\n",
                g(cost.patch_embed), g(cost.backbone_total()), g(cost.qu_total()),
                g(cost.decoder_total()), g(cost.class_heads), g(cost.total()));
  os << line;
  if (key_values) {
    os << '\n';
    for (const auto& [name, v] : cost.components()) os << name << '=' << v << '\n';
    os << "backbone_total=" << cost.backbone_total() << '\n';
    os << "qu_total=" << cost.qu_total() << '\n';
    os << "decoder_total=" << cost.decoder_total() << '\n';
    os << "total=" << cost.total() << '\n';
  }
  return os.str();
}

}  // namespace segvit

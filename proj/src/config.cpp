#include "segvit/config.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <functional>
#include <sstream>

#include "segvit/errors.hpp"

namespace segvit {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

int64_t to_int(const std::string& key, const std::string& v) {
  int64_t out = 0;
  const auto* end = v.data() + v.size();
  auto [p, ec] = std::from_chars(v.data(), end, out);
  if (ec != std::errc() || p != end) throw ConfigError("key '" + key + "': '" + v + "' is not an integer");
  return out;
}

uint64_t to_uint(const std::string& key, const std::string& v) {
  uint64_t out = 0;
  const auto* end = v.data() + v.size();
  auto [p, ec] = std::from_chars(v.data(), end, out);
  if (ec != std::errc() || p != end) {
    throw ConfigError("key '" + key + "': '" + v + "' is not an unsigned integer");
  }
  return out;
}

double to_double(const std::string& key, const std::string& v) {
  try {
    size_t used = 0;
    const double d = std::stod(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return d;
  } catch (const std::exception&) {
    throw ConfigError("key '" + key + "': '" + v + "' is not a number");
  }
}

std::vector<int> to_int_list(const std::string& key, std::string v) {
  if (!v.empty() && v.front() == '[' && v.back() == ']') v = v.substr(1, v.size() - 2);
  std::vector<int> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (item.empty()) continue;
    out.push_back(static_cast<int>(to_int(key, item)));
  }
  return out;
}

std::string fmt_double(double d) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", d);
  return buf;
}

std::string fmt_list(const std::vector<int>& v) {
  std::string s;
  for (size_t i = 0; i < v.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(v[i]);
  }
  return s;
}

struct KeySpec {
  const char* name;
  bool architecture;
  std::function<void(SegVitConfig&, const std::string&, const std::string&)> set;
  std::function<std::string(const SegVitConfig&)> get;
};

#define SEGVIT_INT_KEY(NAME, ARCH, FIELD)                                                    \
  KeySpec {                                                                                  \
    NAME, ARCH, [](SegVitConfig& c, const std::string& k, const std::string& v) {            \
      c.FIELD = to_int(k, v);                                                                \
    },                                                                                       \
        [](const SegVitConfig& c) { return std::to_string(c.FIELD); }                        \
  }
#define SEGVIT_UINT_KEY(NAME, ARCH, FIELD)                                                   \
  KeySpec {                                                                                  \
    NAME, ARCH, [](SegVitConfig& c, const std::string& k, const std::string& v) {            \
      c.FIELD = to_uint(k, v);                                                               \
    },                                                                                       \
        [](const SegVitConfig& c) { return std::to_string(c.FIELD); }                        \
  }
#define SEGVIT_DOUBLE_KEY(NAME, ARCH, FIELD)                                                 \
  KeySpec {                                                                                  \
    NAME, ARCH, [](SegVitConfig& c, const std::string& k, const std::string& v) {            \
      c.FIELD = to_double(k, v);                                                             \
    },                                                                                       \
        [](const SegVitConfig& c) { return fmt_double(c.FIELD); }                            \
  }

const std::vector<KeySpec>& key_table() {
  static const std::vector<KeySpec> table = {
      SEGVIT_INT_KEY("encoder.image_height", true, model.encoder.image_height),
      SEGVIT_INT_KEY("encoder.image_width", true, model.encoder.image_width),
      SEGVIT_INT_KEY("encoder.patch_size", true, model.encoder.patch_size),
      SEGVIT_INT_KEY("encoder.depth", true, model.encoder.depth),
      SEGVIT_INT_KEY("encoder.width", true, model.encoder.width),
      SEGVIT_INT_KEY("encoder.heads", true, model.encoder.heads),
      SEGVIT_INT_KEY("encoder.mlp_ratio", true, model.encoder.mlp_ratio),
      KeySpec{"decoder.cascade_layers", true,
              [](SegVitConfig& c, const std::string& k, const std::string& v) {
                c.model.decoder.cascade_layers = to_int_list(k, v);
              },
              [](const SegVitConfig& c) { return fmt_list(c.model.decoder.cascade_layers); }},
      SEGVIT_INT_KEY("decoder.mlp_ratio", true, model.decoder.mlp_ratio),
      KeySpec{"shrunk.mode", true,
              [](SegVitConfig& c, const std::string&, const std::string& v) {
                c.model.shrunk.mode = parse_shrunk_mode(v);
              },
              [](const SegVitConfig& c) { return to_string(c.model.shrunk.mode); }},
      SEGVIT_INT_KEY("shrunk.qd_layer", true, model.shrunk.qd_layer),
      SEGVIT_INT_KEY("shrunk.qd_factor", true, model.shrunk.qd_factor),
      SEGVIT_INT_KEY("shrunk.qu_count", true, model.shrunk.qu_count),
      SEGVIT_DOUBLE_KEY("loss.lambda_focal", false, loss.lambda_focal),
      SEGVIT_DOUBLE_KEY("loss.lambda_dice", false, loss.lambda_dice),
      SEGVIT_DOUBLE_KEY("loss.no_object_weight", false, loss.no_object_weight),
      SEGVIT_DOUBLE_KEY("loss.focal_gamma", false, loss.focal_gamma),
      SEGVIT_DOUBLE_KEY("loss.focal_alpha", false, loss.focal_alpha),
      SEGVIT_DOUBLE_KEY("loss.dice_eps", false, loss.dice_eps),
      KeySpec{"train.optimizer", false,
              [](SegVitConfig& c, const std::string&, const std::string& v) { c.train.optimizer = v; },
              [](const SegVitConfig& c) { return c.train.optimizer; }},
      SEGVIT_DOUBLE_KEY("train.lr", false, train.lr),
      SEGVIT_DOUBLE_KEY("train.weight_decay", false, train.weight_decay),
      SEGVIT_DOUBLE_KEY("train.beta1", false, train.beta1),
      SEGVIT_DOUBLE_KEY("train.beta2", false, train.beta2),
      KeySpec{"train.schedule", false,
              [](SegVitConfig& c, const std::string&, const std::string& v) { c.train.schedule = v; },
              [](const SegVitConfig& c) { return c.train.schedule; }},
      SEGVIT_INT_KEY("train.warmup", false, train.warmup),
      SEGVIT_DOUBLE_KEY("train.grad_clip", false, train.grad_clip),
      SEGVIT_INT_KEY("train.iterations", false, train.iterations),
      SEGVIT_INT_KEY("train.batch_size", false, train.batch_size),
      SEGVIT_UINT_KEY("train.seed", false, train.seed),
      SEGVIT_INT_KEY("train.log_every", false, train.log_every),
      SEGVIT_INT_KEY("train.eval_every", false, train.eval_every),
      SEGVIT_INT_KEY("train.eval_images", false, train.eval_images),
      KeySpec{"data.classes", true,
              [](SegVitConfig& c, const std::string& k, const std::string& v) {
                c.data.classes = to_int(k, v);
                c.model.decoder.num_classes = c.data.classes;
              },
              [](const SegVitConfig& c) { return std::to_string(c.data.classes); }},
      SEGVIT_INT_KEY("data.train_count", false, data.train_count),
      SEGVIT_INT_KEY("data.eval_count", false, data.eval_count),
      SEGVIT_INT_KEY("data.min_shapes", false, data.min_shapes),
      SEGVIT_INT_KEY("data.max_shapes", false, data.max_shapes),
      SEGVIT_INT_KEY("data.min_size", false, data.min_size),
      SEGVIT_INT_KEY("data.max_size", false, data.max_size),
      SEGVIT_DOUBLE_KEY("data.noise", false, data.noise),
      SEGVIT_UINT_KEY("data.seed", false, data.seed),
  };
  return table;
}

const KeySpec& find_key(const std::string& key) {
  for (const auto& k : key_table()) {
    if (key == k.name) return k;
  }
  throw ConfigError("unknown config key '" + key + "'");
}

}  // namespace

void SegVitConfig::set(const std::string& key, const std::string& value) {
  find_key(trim(key)).set(*this, trim(key), trim(value));
}

std::string SegVitConfig::get(const std::string& key) const { return find_key(key).get(*this); }

std::vector<std::string> SegVitConfig::keys() {
  std::vector<std::string> out;
  for (const auto& k : key_table()) out.emplace_back(k.name);
  return out;
}

SegVitConfig SegVitConfig::parse(const std::string& text, const std::string& origin) {
  SegVitConfig cfg;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(origin + ":" + std::to_string(lineno) + ": expected 'key = value'");
    }
    try {
      cfg.set(line.substr(0, eq), line.substr(eq + 1));
    } catch (const ConfigError& e) {
      throw ConfigError(origin + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return cfg;
}

SegVitConfig SegVitConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read config file " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse(ss.str(), path.string());
}

std::string SegVitConfig::serialize() const {
  std::string out;
  for (const auto& k : key_table()) out += std::string(k.name) + " = " + k.get(*this) + "\n";
  return out;
}

std::string SegVitConfig::architecture() const {
  std::string out;
  for (const auto& k : key_table()) {
    if (k.architecture) out += std::string(k.name) + " = " + k.get(*this) + "\n";
  }
  return out;
}

void SegVitConfig::validate() const {
  if (model.decoder.num_classes != data.classes) {
    throw ConfigError("decoder class count differs from data.classes");
  }
  model.validate();
  loss.validate();
  if (train.optimizer != "adamw") throw ConfigError("unsupported optimizer '" + train.optimizer + "'");
  if (train.schedule != "constant" && train.schedule != "poly") {
    throw ConfigError("train.schedule must be constant or poly");
  }
  if (train.lr < 0 || train.weight_decay < 0 || train.grad_clip < 0) {
    throw ConfigError("learning rate, weight decay and clip must be non-negative");
  }
  if (train.batch_size < 1 || train.iterations < 0 || train.warmup < 0) {
    throw ConfigError("batch size must be positive and iteration counts non-negative");
  }
  if (data.classes < 2) throw ConfigError("data.classes must be at least 2");
  if (data.min_shapes < 0 || data.max_shapes < data.min_shapes) {
    throw ConfigError("data shape-count range is invalid");
  }
  if (data.min_size < 2 || data.max_size < data.min_size ||
      data.max_size > std::min(model.encoder.image_height, model.encoder.image_width)) {
    throw ConfigError("data shape-size range is invalid for the image size");
  }
  if (data.noise < 0) throw ConfigError("data.noise must be non-negative");
}

}  // namespace segvit

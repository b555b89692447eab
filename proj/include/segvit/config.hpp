#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "segvit/losses.hpp"
#include "segvit/model.hpp"

namespace segvit {

struct TrainConfig {
  std::string optimizer = "adamw";
  double lr = 1e-4;
  double weight_decay = 1e-2;
  double beta1 = 0.9;
  double beta2 = 0.999;
  std::string schedule = "constant";  // constant | poly
  int64_t warmup = 0;
  double grad_clip = 0.0;  // global-norm clip, 0 disables
  int64_t iterations = 2000;
  int64_t batch_size = 8;
  uint64_t seed = 0;
  int64_t log_every = 50;
  int64_t eval_every = 0;  // 0 disables periodic train-split mIoU
  int64_t eval_images = 64;
};

struct DataConfig {
  int64_t classes = 4;  // K, background included
  int64_t train_count = 2000;
  int64_t eval_count = 200;
  int64_t min_shapes = 1;
  int64_t max_shapes = 3;
  int64_t min_size = 8;
  int64_t max_size = 16;
  double noise = 0.04;  // pixel noise std, in units of full scale
  uint64_t seed = 1;
};

// Everything a run needs. Text form is "dotted.key = value" per line; '#'
// starts a comment; unknown keys are errors.
struct SegVitConfig {
  ModelConfig model;
  LossWeights loss;
  TrainConfig train;
  DataConfig data;

  static SegVitConfig parse(const std::string& text, const std::string& origin = "<string>");
  static SegVitConfig load(const std::filesystem::path& path);

  // Single override in "key=value" or key/value form.
  void set(const std::string& key, const std::string& value);
  std::string get(const std::string& key) const;
  static std::vector<std::string> keys();

  // Canonical text with every key; parse(serialize()) reproduces the config.
  std::string serialize() const;
  // Only the keys that determine parameter shapes and names.
  std::string architecture() const;
  void validate() const;
};

}  // namespace segvit

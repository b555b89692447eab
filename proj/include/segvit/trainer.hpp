#pragma once

#include <cstdint>
#include <iosfwd>
#include <vector>

#include "segvit/checkpoint.hpp"
#include "segvit/config.hpp"
#include "segvit/dataset.hpp"
#include "segvit/evaluation.hpp"
#include "segvit/model.hpp"

namespace segvit {

// [H, W, 3] with bytes mapped to [-1, 1].
template <typename T>
Tensor<T> image_tensor(const Image& image);

// Adam with decoupled weight decay. Decay applies to projection matrices
// (names ending in "_weight") only.
class AdamW {
 public:
  AdamW(const TrainConfig& config, ParameterStore<float>& store);

  void step(double lr);
  int64_t steps() const { return step_; }
  std::vector<TensorRecord> moments() const;
  void load(int64_t step, const std::vector<TensorRecord>& moments);

 private:
  TrainConfig config_;
  ParameterStore<float>* store_;
  std::vector<bool> decay_;
  std::vector<std::vector<float>> m_;
  std::vector<std::vector<float>> v_;
  int64_t step_ = 0;
};

double learning_rate(const TrainConfig& config, int64_t iteration);

// Image indices for an iteration; a pure function of (seed, iteration).
std::vector<int64_t> batch_indices(uint64_t seed, int64_t iteration, int64_t batch_size,
                                   int64_t dataset_size);

struct StepStats {
  int64_t iteration = 0;
  double lr = 0.0;
  double loss = 0.0;  // batch mean of the total objective
  double cls = 0.0;   // batch means, summed over stages
  double focal = 0.0;
  double dice = 0.0;
  double grad_norm = 0.0;
};

class Trainer {
 public:
  explicit Trainer(const SegVitConfig& config);
  // Continues from a checkpoint; its architecture must match `config`.
  Trainer(const SegVitConfig& config, const Checkpoint& checkpoint);
  // The optimizer points into model_.
  Trainer(const Trainer&) = delete;
  Trainer& operator=(const Trainer&) = delete;

  // One optimizer step on batch `iteration()`, then advances the counter.
  StepStats step(const std::vector<Sample>& train_set);
  // Steps until `until` iterations are done (config iterations when < 0),
  // writing one log line per log interval and per periodic evaluation.
  void run(const std::vector<Sample>& train_set, std::ostream& log, int64_t until = -1);

  Checkpoint checkpoint() const;
  int64_t iteration() const { return iteration_; }
  const SegVitModel<float>& model() const { return model_; }
  SegVitModel<float>& model() { return model_; }
  const SegVitConfig& config() const { return config_; }

 private:
  SegVitConfig config_;
  SegVitModel<float> model_;
  AdamW optimizer_;
  int64_t iteration_ = 0;
};

std::string format_step(const StepStats& stats);

// Loads the model weights of a checkpoint, validating the architecture
// against the embedded config.
SegVitModel<float> load_model(const Checkpoint& checkpoint);

std::vector<LabelMap> predict(const SegVitModel<float>& model, const std::vector<Sample>& samples,
                              int64_t limit = -1);
MiouResult evaluate(const SegVitModel<float>& model, const std::vector<Sample>& samples,
                    int64_t limit = -1);

}  // namespace segvit

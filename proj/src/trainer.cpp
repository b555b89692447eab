#include "segvit/trainer.hpp"

#include <cmath>
#include <cstdio>
#include <ostream>
#include <random>

#include "segvit/errors.hpp"
#include "segvit/losses.hpp"
#include "segvit/ops.hpp"

namespace segvit {

template <typename T>
Tensor<T> image_tensor(const Image& image) {
  std::vector<T> v(image.rgb.size());
  for (size_t i = 0; i < v.size(); ++i) v[i] = static_cast<T>((image.rgb[i] / 255.0 - 0.5) * 2.0);
  return Tensor<T>::from_data({image.height, image.width, 3}, std::move(v));
}

template Tensor<float> image_tensor(const Image&);
template Tensor<double> image_tensor(const Image&);

namespace {

bool ends_with(const std::string& s, const std::string& suffix) {
  return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

}  // namespace

AdamW::AdamW(const TrainConfig& config, ParameterStore<float>& store) : config_(config), store_(&store) {
  for (const auto& p : store.all()) {
    decay_.push_back(ends_with(p.name, "_weight"));
    m_.emplace_back(static_cast<size_t>(p.tensor.numel()), 0.0f);
    v_.emplace_back(static_cast<size_t>(p.tensor.numel()), 0.0f);
  }
}

void AdamW::step(double lr) {
  ++step_;
  const double b1 = config_.beta1, b2 = config_.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(step_));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(step_));
  constexpr double kEps = 1e-8;
  auto& params = store_->all();
  for (size_t i = 0; i < params.size(); ++i) {
    auto& t = params[i].tensor;
    auto w = t.mutable_data();
    const auto g = t.grad();
    auto& m = m_[i];
    auto& v = v_[i];
    const double decay = decay_[i] ? lr * config_.weight_decay : 0.0;
    for (size_t k = 0; k < w.size(); ++k) {
      const double gk = g.empty() ? 0.0 : g[k];
      m[k] = static_cast<float>(b1 * m[k] + (1.0 - b1) * gk);
      v[k] = static_cast<float>(b2 * v[k] + (1.0 - b2) * gk * gk);
      const double update = (m[k] / c1) / (std::sqrt(v[k] / c2) + kEps);
      w[k] = static_cast<float>(w[k] - decay * w[k] - lr * update);
    }
  }
}

std::vector<TensorRecord> AdamW::moments() const {
  std::vector<TensorRecord> out;
  const auto& params = store_->all();
  for (size_t i = 0; i < params.size(); ++i) {
    out.push_back({"m." + params[i].name, params[i].tensor.shape(), m_[i]});
    out.push_back({"v." + params[i].name, params[i].tensor.shape(), v_[i]});
  }
  return out;
}

void AdamW::load(int64_t step, const std::vector<TensorRecord>& moments) {
  const auto& params = store_->all();
  if (moments.size() != 2 * params.size()) throw ConfigError("checkpoint optimizer state size mismatch");
  for (size_t i = 0; i < params.size(); ++i) {
    const auto& m = moments[2 * i];
    const auto& v = moments[2 * i + 1];
    if (m.name != "m." + params[i].name || v.name != "v." + params[i].name ||
        m.values.size() != m_[i].size() || v.values.size() != v_[i].size()) {
      throw ConfigError("checkpoint optimizer state does not match parameter '" + params[i].name + "'");
    }
    m_[i] = m.values;
    v_[i] = v.values;
  }
  step_ = step;
}

double learning_rate(const TrainConfig& config, int64_t iteration) {
  double lr = config.lr;
  if (config.schedule == "poly" && config.iterations > 0) {
    lr *= std::pow(std::max(0.0, 1.0 - static_cast<double>(iteration) / config.iterations), 0.9);
  }
  if (iteration < config.warmup) lr *= static_cast<double>(iteration + 1) / config.warmup;
  return lr;
}

std::vector<int64_t> batch_indices(uint64_t seed, int64_t iteration, int64_t batch_size,
                                   int64_t dataset_size) {
  if (dataset_size <= 0) throw DataError("training split is empty");
  std::seed_seq seq{static_cast<uint32_t>(seed), static_cast<uint32_t>(seed >> 32), 0x5eedu,
                    static_cast<uint32_t>(iteration), static_cast<uint32_t>(iteration >> 32)};
  Rng rng(seq);
  std::uniform_int_distribution<int64_t> pick(0, dataset_size - 1);
  std::vector<int64_t> out(static_cast<size_t>(batch_size));
  for (auto& i : out) i = pick(rng);
  return out;
}

Trainer::Trainer(const SegVitConfig& config)
    : config_(config), model_(config.model, config.train.seed), optimizer_(config.train, model_.params()) {
  config_.validate();
}

Trainer::Trainer(const SegVitConfig& config, const Checkpoint& checkpoint) : Trainer(config) {
  const SegVitConfig saved = SegVitConfig::parse(checkpoint.config, "<checkpoint>");
  if (saved.architecture() != config_.architecture()) {
    throw ConfigError("checkpoint architecture does not match the requested config");
  }
  restore(checkpoint.params, model_.params());
  optimizer_.load(checkpoint.optimizer_step, checkpoint.moments);
  iteration_ = checkpoint.iteration;
}

StepStats Trainer::step(const std::vector<Sample>& train_set) {
  StepStats stats;
  stats.iteration = iteration_;
  stats.lr = learning_rate(config_.train, iteration_);
  const int64_t b = config_.train.batch_size;
  const auto indices = batch_indices(config_.train.seed, iteration_, b, static_cast<int64_t>(train_set.size()));
  auto& store = model_.params();
  store.zero_grad();
  const float inv_b = 1.0f / static_cast<float>(b);
  for (int64_t idx : indices) {
    const Sample& s = train_set[static_cast<size_t>(idx)];
    const SegTarget target(s.labels, config_.model.decoder.num_classes);
    try {
      const auto out = model_.forward(image_tensor<float>(s.image));
      const auto loss = total_loss(out.cascade, target, config_.loss);
      scale(loss.total, inv_b).backward();
      stats.loss += loss.total.item() / static_cast<double>(b);
      for (const auto& st : loss.stages) {
        stats.cls += st.cls / static_cast<double>(b);
        stats.focal += st.focal / static_cast<double>(b);
        stats.dice += st.dice / static_cast<double>(b);
      }
    } catch (const NumericError& e) {
      throw NumericError("iteration " + std::to_string(iteration_) + " image " + std::to_string(idx) +
                         ": " + e.what());
    }
  }
  double sq = 0.0;
  for (const auto& p : store.all()) {
    for (float g : p.tensor.grad()) sq += static_cast<double>(g) * g;
  }
  stats.grad_norm = std::sqrt(sq);
  if (!std::isfinite(stats.grad_norm)) {
    throw NumericError("iteration " + std::to_string(iteration_) + ": non-finite gradient norm");
  }
  if (config_.train.grad_clip > 0 && stats.grad_norm > config_.train.grad_clip) {
    const float f = static_cast<float>(config_.train.grad_clip / stats.grad_norm);
    for (auto& p : store.all()) {
      for (float& g : p.tensor.mutable_grad()) g *= f;
    }
  }
  optimizer_.step(stats.lr);
  ++iteration_;
  return stats;
}

std::string format_step(const StepStats& s) {
  char line[256];
  std::snprintf(line, sizeof line,
                "iter=%lld lr=%.9g loss=%.9g cls=%.9g focal=%.9g dice=%.9g grad_norm=%.9g",
                static_cast<long long>(s.iteration), s.lr, s.loss, s.cls, s.focal, s.dice, s.grad_norm);
  return line;
}

void Trainer::run(const std::vector<Sample>& train_set, std::ostream& log, int64_t until) {
  const TrainConfig& tc = config_.train;
  const int64_t end = until < 0 ? tc.iterations : std::min(until, tc.iterations);
  while (iteration_ < end) {
    const StepStats stats = step(train_set);
    const int64_t done = iteration_;
    if ((tc.log_every > 0 && (stats.iteration % tc.log_every == 0)) || done == tc.iterations) {
      log << format_step(stats) << '\n';
    }
    if (tc.eval_every > 0 && done % tc.eval_every == 0) {
      const auto r = evaluate(model_, train_set, tc.eval_images);
      char line[96];
      std::snprintf(line, sizeof line, "iter=%lld train_miou=%.9g", static_cast<long long>(done), r.mean);
      log << line << '\n';
    }
    log.flush();
  }
}

Checkpoint Trainer::checkpoint() const {
  Checkpoint c;
  c.config = config_.serialize();
  c.iteration = iteration_;
  c.optimizer_step = optimizer_.steps();
  c.params = capture(model_.params());
  c.moments = optimizer_.moments();
  return c;
}

SegVitModel<float> load_model(const Checkpoint& checkpoint) {
  const SegVitConfig cfg = SegVitConfig::parse(checkpoint.config, "<checkpoint>");
  cfg.validate();
  SegVitModel<float> model(cfg.model, cfg.train.seed);
  restore(checkpoint.params, model.params());
  return model;
}

std::vector<LabelMap> predict(const SegVitModel<float>& model, const std::vector<Sample>& samples,
                              int64_t limit) {
  const size_t n = limit < 0 ? samples.size() : std::min(samples.size(), static_cast<size_t>(limit));
  std::vector<LabelMap> out;
  out.reserve(n);
  for (size_t i = 0; i < n; ++i) out.push_back(infer(model, image_tensor<float>(samples[i].image)));
  return out;
}

MiouResult evaluate(const SegVitModel<float>& model, const std::vector<Sample>& samples, int64_t limit) {
  const auto preds = predict(model, samples, limit);
  std::vector<LabelMap> gts;
  for (size_t i = 0; i < preds.size(); ++i) gts.push_back(samples[i].labels);
  return miou(preds, gts, model.config().decoder.num_classes);
}

}  // namespace segvit

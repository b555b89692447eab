#include "segvit/losses.hpp"

#include <cmath>
#include <memory>

#include "segvit/errors.hpp"
#include "segvit/ops.hpp"

namespace segvit {

using detail::make_result;
using detail::Node;

void LossWeights::validate() const {
  if (lambda_focal < 0 || lambda_dice < 0 || no_object_weight < 0 || focal_gamma < 0 ||
      focal_alpha < 0 || focal_alpha > 1 || dice_eps < 0) {
    throw ConfigError("loss weights must be non-negative and focal alpha within [0, 1]");
  }
}

SegTarget::SegTarget(LabelMap labels, int64_t num_classes)
    : labels_(std::move(labels)),
      num_classes_(num_classes),
      present_(static_cast<size_t>(num_classes), false) {
  if (labels_.labels.size() != static_cast<size_t>(labels_.height * labels_.width)) {
    throw DataError("label map storage does not match its extents");
  }
  for (uint8_t v : labels_.labels) {
    if (v == kIgnoreLabel) continue;
    if (v >= num_classes_) {
      throw DataError("label " + std::to_string(v) + " >= class count " +
                      std::to_string(num_classes_));
    }
    present_[v] = true;
    ++valid_;
  }
}

namespace {

template <typename T>
void check_masks(const Tensor<T>& x, const SegTarget& t, const char* op) {
  if (x.shape() != Shape{t.num_classes(), t.height(), t.width()}) {
    throw DimensionError(std::string(op) + ": masks " + shape_str(x.shape()) + " vs target " +
                         std::to_string(t.num_classes()) + "x" + std::to_string(t.height()) + "x" +
                         std::to_string(t.width()));
  }
}

double softplus(double x) {
  return x > 0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

// Scalar loss whose gradient with respect to `input` was computed alongside
// the value.
template <typename T>
Tensor<T> scalar_with_grad(const char* op, double value, const Tensor<T>& input,
                           std::vector<T> grad) {
  auto g = std::make_shared<std::vector<T>>(std::move(grad));
  return make_result<T>(op, {}, Buffer<T>{static_cast<T>(value)}, {input}, [g](Node<T>& node) {
    T* gx = node.inputs[0]->grad_data();
    const T up = node.grad[0];
    for (size_t i = 0; i < g->size(); ++i) gx[i] += up * (*g)[i];
  });
}

}  // namespace

template <typename T>
Tensor<T> focal_loss(const Tensor<T>& mask_logits, const SegTarget& target, double gamma,
                     double alpha) {
  check_masks(mask_logits, target, "focal_loss");
  const int64_t n = target.num_classes();
  const int64_t hw = target.height() * target.width();
  const double count = static_cast<double>(n * target.valid_pixels());
  const auto x = mask_logits.data();
  std::vector<T> grad(x.size(), T(0));
  double total = 0.0;
  if (count > 0) {
    for (int64_t c = 0; c < n; ++c) {
      for (int64_t p = 0; p < hw; ++p) {
        if (target.ignored(p)) continue;
        const bool pos = target.in_mask(c, p);
        // z is the logit of the correct binary outcome, so p_t = sigmoid(z).
        const double z = pos ? x[c * hw + p] : -static_cast<double>(x[c * hw + p]);
        const double pt = z >= 0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z));
        const double at = pos ? alpha : 1.0 - alpha;
        const double log_pt = -softplus(-z);
        const double mod = std::pow(1.0 - pt, gamma);
        total += -at * mod * log_pt;
        const double dz = at * mod * (gamma * pt * log_pt - (1.0 - pt));
        grad[c * hw + p] = static_cast<T>((pos ? dz : -dz) / count);
      }
    }
    total /= count;
  }
  return scalar_with_grad<T>("focal_loss", total, mask_logits, std::move(grad));
}

template <typename T>
Tensor<T> dice_loss(const Tensor<T>& mask_probs, const SegTarget& target, double eps) {
  check_masks(mask_probs, target, "dice_loss");
  const int64_t n = target.num_classes();
  const int64_t hw = target.height() * target.width();
  const auto p = mask_probs.data();
  for (T v : p) {
    if (v < T(0) || v > T(1)) throw DimensionError("dice_loss: probabilities must lie in [0, 1]");
  }
  std::vector<T> grad(p.size(), T(0));
  double total = 0.0;
  for (int64_t c = 0; c < n; ++c) {
    double inter = 0, sp = 0, st = 0;
    for (int64_t i = 0; i < hw; ++i) {
      if (target.ignored(i)) continue;
      const double t = target.in_mask(c, i) ? 1.0 : 0.0;
      inter += p[c * hw + i] * t;
      sp += p[c * hw + i];
      st += t;
    }
    const double num = 2.0 * inter + eps;
    const double den = sp + st + eps;
    total += 1.0 - num / den;
    for (int64_t i = 0; i < hw; ++i) {
      if (target.ignored(i)) continue;
      const double t = target.in_mask(c, i) ? 1.0 : 0.0;
      grad[c * hw + i] = static_cast<T>(-(2.0 * t * den - num) / (den * den) / n);
    }
  }
  return scalar_with_grad<T>("dice_loss", total / static_cast<double>(n), mask_probs,
                             std::move(grad));
}

template <typename T>
Tensor<T> cls_loss(const Tensor<T>& class_logits, const SegTarget& target, const LossWeights& w) {
  const int64_t n = target.num_classes();
  if (class_logits.shape() != Shape{n, n + 1}) {
    throw DimensionError("cls_loss: logits " + shape_str(class_logits.shape()) + " for " +
                         std::to_string(n) + " classes");
  }
  const int64_t k1 = n + 1;
  const auto x = class_logits.data();
  std::vector<T> grad(x.size(), T(0));
  double total = 0.0;
  for (int64_t c = 0; c < n; ++c) {
    const bool present = target.present(c);
    const int64_t want = present ? c : n;
    const double weight = present ? 1.0 : w.no_object_weight;
    double mx = x[c * k1];
    for (int64_t j = 1; j < k1; ++j) mx = std::max<double>(mx, x[c * k1 + j]);
    double z = 0;
    for (int64_t j = 0; j < k1; ++j) z += std::exp(x[c * k1 + j] - mx);
    total += weight * (std::log(z) + mx - x[c * k1 + want]);
    for (int64_t j = 0; j < k1; ++j) {
      const double sm = std::exp(x[c * k1 + j] - mx) / z;
      grad[c * k1 + j] = static_cast<T>(weight * (sm - (j == want ? 1.0 : 0.0)) / n);
    }
  }
  return scalar_with_grad<T>("cls_loss", total / static_cast<double>(n), class_logits,
                             std::move(grad));
}

template <typename T>
Tensor<T> upsample_to(const Tensor<T>& mask_logits, int64_t height, int64_t width) {
  if (mask_logits.dim(1) == height && mask_logits.dim(2) == width) return mask_logits;
  return resize_bilinear(mask_logits, height, width);
}

template <typename T>
LossBreakdown<T> total_loss(const CascadeOutput<T>& out, const SegTarget& target,
                            const LossWeights& w) {
  w.validate();
  if (out.class_logits.empty()) throw ConfigError("total_loss: no decoder stages");
  LossBreakdown<T> result;
  Tensor<T> total;
  for (size_t s = 0; s < out.class_logits.size(); ++s) {
    const std::string where = "total_loss stage " + std::to_string(s + 1) + " ";
    StageLoss parts;
    Tensor<T> cls, focal, dice;
    try {
      cls = cls_loss(out.class_logits[s], target, w);
    } catch (const NumericError& e) {
      throw NumericError(where + "cls term: " + e.what());
    }
    const auto logits = upsample_to(out.cumulative_mask_logits[s], target.height(), target.width());
    try {
      focal = focal_loss(logits, target, w.focal_gamma, w.focal_alpha);
    } catch (const NumericError& e) {
      throw NumericError(where + "focal term: " + e.what());
    }
    try {
      dice = dice_loss(sigmoid(logits), target, w.dice_eps);
    } catch (const NumericError& e) {
      throw NumericError(where + "dice term: " + e.what());
    }
    parts.cls = cls.item();
    parts.focal = focal.item();
    parts.dice = dice.item();
    auto stage = add(add(cls, scale(focal, static_cast<T>(w.lambda_focal))),
                     scale(dice, static_cast<T>(w.lambda_dice)));
    total = s == 0 ? stage : add(total, stage);
    result.stages.push_back(parts);
  }
  if (!std::isfinite(static_cast<double>(total.item()))) {
    throw NumericError("total_loss: non-finite total");
  }
  result.total = total;
  return result;
}

#define SEGVIT_INSTANTIATE_LOSSES(T)                                                          \
  template Tensor<T> focal_loss(const Tensor<T>&, const SegTarget&, double, double);         \
  template Tensor<T> dice_loss(const Tensor<T>&, const SegTarget&, double);                  \
  template Tensor<T> cls_loss(const Tensor<T>&, const SegTarget&, const LossWeights&);       \
  template Tensor<T> upsample_to(const Tensor<T>&, int64_t, int64_t);                        \
  template LossBreakdown<T> total_loss(const CascadeOutput<T>&, const SegTarget&,            \
                                       const LossWeights&);

SEGVIT_INSTANTIATE_LOSSES(float)
SEGVIT_INSTANTIATE_LOSSES(double)

}  // namespace segvit

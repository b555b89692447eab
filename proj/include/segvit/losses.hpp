#pragma once

#include <cstdint>
#include <vector>

#include "segvit/atm_decoder.hpp"
#include "segvit/label_map.hpp"
#include "segvit/tensor.hpp"

namespace segvit {

struct LossWeights {
  double lambda_focal = 20.0;
  double lambda_dice = 1.0;
  double no_object_weight = 0.1;
  double focal_gamma = 2.0;
  double focal_alpha = 0.25;
  double dice_eps = 1.0;

  void validate() const;
};

// Ground truth for one image: labels in [0, K) or kIgnoreLabel.
class SegTarget {
 public:
  SegTarget(LabelMap labels, int64_t num_classes);

  const LabelMap& labels() const { return labels_; }
  int64_t num_classes() const { return num_classes_; }
  int64_t height() const { return labels_.height; }
  int64_t width() const { return labels_.width; }
  bool present(int64_t c) const { return present_[static_cast<size_t>(c)]; }
  bool ignored(int64_t pixel) const { return labels_.labels[static_cast<size_t>(pixel)] == kIgnoreLabel; }
  // Binary mask of class c at a flat pixel index.
  bool in_mask(int64_t c, int64_t pixel) const {
    return labels_.labels[static_cast<size_t>(pixel)] == c;
  }
  int64_t valid_pixels() const { return valid_; }

 private:
  LabelMap labels_;
  int64_t num_classes_;
  std::vector<bool> present_;
  int64_t valid_ = 0;
};

// Mean over classes and non-ignored pixels of -a_t (1 - p_t)^g log p_t, with
// p = sigmoid(logit). Logits are [N, H, W] at label resolution.
template <typename T>
Tensor<T> focal_loss(const Tensor<T>& mask_logits, const SegTarget& target, double gamma = 2.0,
                     double alpha = 0.25);

// Mean over classes of 1 - (2 sum(p t) + eps) / (sum p + sum t + eps).
template <typename T>
Tensor<T> dice_loss(const Tensor<T>& mask_probs, const SegTarget& target, double eps = 1.0);

// Token c targets class c when it is present in the image and the no-object
// slot (index K) otherwise; no-object terms are down-weighted. Mean over
// tokens.
template <typename T>
Tensor<T> cls_loss(const Tensor<T>& class_logits, const SegTarget& target, const LossWeights& w);

struct StageLoss {
  double cls = 0.0;
  double focal = 0.0;
  double dice = 0.0;
};

template <typename T>
struct LossBreakdown {
  Tensor<T> total;
  std::vector<StageLoss> stages;
};

// Sum over stages of cls + l_focal * focal + l_dice * dice, with the mask
// terms evaluated on each stage's cumulative mask logits upsampled to the
// label resolution.
template <typename T>
LossBreakdown<T> total_loss(const CascadeOutput<T>& out, const SegTarget& target,
                            const LossWeights& w);

// Bilinear upsample of [N, h, w] mask logits to the label grid (no-op when
// already there).
template <typename T>
Tensor<T> upsample_to(const Tensor<T>& mask_logits, int64_t height, int64_t width);

}  // namespace segvit

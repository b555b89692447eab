#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "segvit/label_map.hpp"
#include "segvit/model.hpp"

namespace segvit {

struct MiouResult {
  // nullopt for classes absent from both prediction and ground truth.
  std::vector<std::optional<double>> iou;
  double mean = 0.0;
  int64_t pixels = 0;
};

// Rows are ground truth, columns are predictions. Pixels whose ground truth
// is the ignore label are skipped.
class ConfusionMatrix {
 public:
  explicit ConfusionMatrix(int64_t num_classes);

  void accumulate(const LabelMap& pred, const LabelMap& gt);
  void merge(const ConfusionMatrix& other);

  int64_t num_classes() const { return k_; }
  int64_t at(int64_t gt, int64_t pred) const { return counts_[static_cast<size_t>(gt * k_ + pred)]; }
  // Valid ground-truth pixels the prediction left at the ignore label.
  int64_t unassigned(int64_t gt) const { return unassigned_[static_cast<size_t>(gt)]; }
  int64_t total() const;
  MiouResult result() const;
  bool operator==(const ConfusionMatrix&) const = default;

 private:
  int64_t k_;
  std::vector<int64_t> counts_;
  std::vector<int64_t> unassigned_;
};

// Dataset-level IoU: counts are pooled over all images before dividing.
MiouResult miou(const std::vector<LabelMap>& preds, const std::vector<LabelMap>& gts,
                int64_t num_classes);

// Plain-text table of per-class IoU plus the mean.
std::string format_miou_report(const MiouResult& result);

// Encoder -> cascade -> bilinear upsample of the final cumulative mask logits
// to the image size -> semantic_inference.
template <typename T>
LabelMap infer(const SegVitModel<T>& model, const Tensor<T>& image);

}  // namespace segvit

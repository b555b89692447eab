#include "segvit/evaluation.hpp"

#include <cstdio>
#include <numeric>
#include <sstream>

#include "segvit/errors.hpp"
#include "segvit/losses.hpp"
#include "segvit/ops.hpp"

namespace segvit {

ConfusionMatrix::ConfusionMatrix(int64_t num_classes)
    : k_(num_classes),
      counts_(static_cast<size_t>(num_classes * num_classes), 0),
      unassigned_(static_cast<size_t>(num_classes), 0) {
  if (num_classes < 1) throw ConfigError("confusion matrix needs at least one class");
}

void ConfusionMatrix::accumulate(const LabelMap& pred, const LabelMap& gt) {
  if (pred.height != gt.height || pred.width != gt.width) {
    throw DataError("prediction " + std::to_string(pred.height) + "x" + std::to_string(pred.width) +
                    " does not match ground truth " + std::to_string(gt.height) + "x" +
                    std::to_string(gt.width));
  }
  for (size_t i = 0; i < gt.labels.size(); ++i) {
    const int64_t g = gt.labels[i];
    const int64_t p = pred.labels[i];
    if (g != kIgnoreLabel && g >= k_) {
      throw DataError("ground-truth label " + std::to_string(g) + " >= class count " + std::to_string(k_));
    }
    if (p != kIgnoreLabel && p >= k_) {
      throw DataError("predicted label " + std::to_string(p) + " >= class count " + std::to_string(k_));
    }
    if (g == kIgnoreLabel) continue;
    if (p == kIgnoreLabel) {
      ++unassigned_[static_cast<size_t>(g)];
    } else {
      ++counts_[static_cast<size_t>(g * k_ + p)];
    }
  }
}

void ConfusionMatrix::merge(const ConfusionMatrix& other) {
  if (other.k_ != k_) throw DataError("cannot merge confusion matrices of different sizes");
  for (size_t i = 0; i < counts_.size(); ++i) counts_[i] += other.counts_[i];
  for (size_t i = 0; i < unassigned_.size(); ++i) unassigned_[i] += other.unassigned_[i];
}

int64_t ConfusionMatrix::total() const {
  return std::accumulate(counts_.begin(), counts_.end(), int64_t{0}) +
         std::accumulate(unassigned_.begin(), unassigned_.end(), int64_t{0});
}

MiouResult ConfusionMatrix::result() const {
  MiouResult r;
  r.pixels = total();
  double sum = 0;
  int64_t counted = 0;
  for (int64_t c = 0; c < k_; ++c) {
    const int64_t tp = at(c, c);
    int64_t fp = 0, fn = unassigned(c);
    for (int64_t j = 0; j < k_; ++j) {
      if (j == c) continue;
      fp += at(j, c);
      fn += at(c, j);
    }
    const int64_t denom = tp + fp + fn;
    if (denom == 0) {
      r.iou.emplace_back(std::nullopt);
      continue;
    }
    const double iou = static_cast<double>(tp) / static_cast<double>(denom);
    r.iou.emplace_back(iou);
    sum += iou;
    ++counted;
  }
  r.mean = counted ? sum / static_cast<double>(counted) : 0.0;
  return r;
}

MiouResult miou(const std::vector<LabelMap>& preds, const std::vector<LabelMap>& gts,
                int64_t num_classes) {
  if (preds.size() != gts.size()) {
    throw DataError(std::to_string(preds.size()) + " predictions for " + std::to_string(gts.size()) +
                    " ground-truth maps");
  }
  ConfusionMatrix cm(num_classes);
  for (size_t i = 0; i < preds.size(); ++i) cm.accumulate(preds[i], gts[i]);
  return cm.result();
}

std::string format_miou_report(const MiouResult& result) {
  std::ostringstream os;
  char line[96];
  os << "class     IoU\n";
  for (size_t c = 0; c < result.iou.size(); ++c) {
    if (result.iou[c]) {
      std::snprintf(line, sizeof line, "%-8zu  %.6f\n", c, *result.iou[c]);
    } else {
      std::snprintf(line, sizeof line, "%-8zu  n/a\n", c);
    }
    os << line;
  }
  std::snprintf(line, sizeof line, "mIoU      %.6f\npixels    %lld\n", result.mean,
                static_cast<long long>(result.pixels));
  os << line;
  return os.str();
}

template <typename T>
LabelMap infer(const SegVitModel<T>& model, const Tensor<T>& image) {
  NoGradGuard no_grad;
  const EncoderConfig& ec = model.config().encoder;
  const auto out = model.forward(image);
  const auto logits = upsample_to(out.cascade.final_mask_logits(), ec.image_height, ec.image_width);
  return semantic_inference(out.cascade.final_logits(), sigmoid(logits));
}

template LabelMap infer(const SegVitModel<float>&, const Tensor<float>&);
template LabelMap infer(const SegVitModel<double>&, const Tensor<double>&);

}  // namespace segvit

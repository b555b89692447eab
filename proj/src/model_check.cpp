#include "segvit/model_check.hpp"

#include "segvit/dataset.hpp"
#include "segvit/losses.hpp"
#include "segvit/trainer.hpp"

namespace segvit {

GradCheckResult check_model_gradients(const SegVitConfig& config, const GradCheckOptions& options) {
  config.validate();
  SegVitModel<double> model(config.model, config.train.seed);
  const auto& ec = config.model.encoder;
  const Sample sample = make_sample(config.data, ec.image_height, ec.image_width, "gradcheck", 0);
  const Tensor<double> image = image_tensor<double>(sample.image);
  const SegTarget target(sample.labels, config.model.decoder.num_classes);
  auto loss = [&]() { return total_loss(model.forward(image).cascade, target, config.loss).total; };
  return grad_check(loss, model.params().all(), options);
}

}  // namespace segvit

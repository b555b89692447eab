#pragma once

#include "segvit/config.hpp"
#include "segvit/grad_check.hpp"

namespace segvit {

// Gradient check of the full training objective in 64-bit on one synthetic
// sample drawn from the config's data settings.
GradCheckResult check_model_gradients(const SegVitConfig& config, const GradCheckOptions& options);

}  // namespace segvit

#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "segvit/params.hpp"
#include "segvit/tensor.hpp"

namespace segvit {

struct GradCheckOptions {
  double step = 1e-5;
  // Entries probed per parameter tensor; 0 probes every entry.
  int64_t samples_per_tensor = 0;
  uint64_t seed = 0;
  // Gradients smaller than this are compared on an absolute scale.
  double magnitude_floor = 1e-5;
};

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::string worst_param;
  int64_t worst_index = -1;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
  int64_t probes = 0;
};

// |a - n| / max(|a|, |n|, floor)
double relative_error(double analytic, double numeric, double floor);

// Compares tape gradients of a scalar loss against central finite
// differences, parameter by parameter. `loss` must rebuild its graph on every
// call. Parameters are restored bitwise afterwards.
GradCheckResult grad_check(const std::function<Tensor<double>()>& loss,
                           std::vector<Parameter<double>>& params,
                           const GradCheckOptions& options = {});

}  // namespace segvit

#include "segvit/grad_check.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "segvit/errors.hpp"
#include "segvit/params.hpp"

namespace segvit {

double relative_error(double analytic, double numeric, double floor) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), floor});
  return std::abs(analytic - numeric) / denom;
}

namespace {

double eval_loss(const std::function<Tensor<double>()>& loss, const char* phase) {
  NoGradGuard no_grad;
  Tensor<double> value;
  try {
    value = loss();
  } catch (const NumericError& e) {
    throw NumericError(std::string("grad_check ") + phase + ": " + e.what());
  }
  const double v = value.item();
  if (!std::isfinite(v)) throw NumericError(std::string("grad_check ") + phase + ": non-finite loss");
  return v;
}

}  // namespace

GradCheckResult grad_check(const std::function<Tensor<double>()>& loss,
                           std::vector<Parameter<double>>& params,
                           const GradCheckOptions& options) {
  for (auto& p : params) p.tensor.zero_grad();
  Tensor<double> l = loss();
  if (!std::isfinite(l.item())) throw NumericError("grad_check: non-finite loss");
  l.backward();

  GradCheckResult result;
  Rng rng(options.seed);
  for (auto& p : params) {
    const int64_t n = p.tensor.numel();
    std::vector<int64_t> indices(static_cast<size_t>(n));
    std::iota(indices.begin(), indices.end(), 0);
    if (options.samples_per_tensor > 0 && options.samples_per_tensor < n) {
      std::shuffle(indices.begin(), indices.end(), rng);
      indices.resize(static_cast<size_t>(options.samples_per_tensor));
      std::sort(indices.begin(), indices.end());
    }
    const auto grad = p.tensor.grad();
    auto values = p.tensor.mutable_data();
    for (int64_t idx : indices) {
      const double analytic = grad.empty() ? 0.0 : grad[idx];
      const double saved = values[idx];
      values[idx] = saved + options.step;
      const double up = eval_loss(loss, "forward(+h)");
      values[idx] = saved - options.step;
      const double down = eval_loss(loss, "forward(-h)");
      values[idx] = saved;
      const double numeric = (up - down) / (2.0 * options.step);
      const double err = relative_error(analytic, numeric, options.magnitude_floor);
      ++result.probes;
      if (err > result.max_rel_error || result.worst_index < 0) {
        result.max_rel_error = err;
        result.worst_param = p.name;
        result.worst_index = idx;
        result.worst_analytic = analytic;
        result.worst_numeric = numeric;
      }
    }
  }
  return result;
}

}  // namespace segvit

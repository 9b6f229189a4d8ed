#include "mbridge/numcore/grad_check.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "mbridge/numcore/rng.hpp"

namespace mbridge {

GradCheckResult grad_check(const std::function<double()>& loss_and_grad,
                           const ParameterList& params, const GradCheckOptions& options) {
  loss_and_grad();
  std::vector<Tensor> analytic;
  analytic.reserve(params.size());
  for (const auto* p : params) analytic.push_back(p->grad);

  Rng rng(options.seed);
  GradCheckResult result;
  for (std::size_t pi = 0; pi < params.size(); ++pi) {
    Parameter& p = *params[pi];
    const std::size_t n = p.value.size();
    std::vector<std::size_t> coords(n);
    std::iota(coords.begin(), coords.end(), std::size_t{0});
    if (n > options.samples_per_tensor) {
      // Partial Fisher-Yates: the first k entries become a uniform sample.
      for (std::size_t k = 0; k < options.samples_per_tensor; ++k) {
        const std::size_t j = k + static_cast<std::size_t>(rng.index(n - k));
        std::swap(coords[k], coords[j]);
      }
      coords.resize(options.samples_per_tensor);
    }
    for (const std::size_t idx : coords) {
      const double saved = p.value[idx];
      p.value[idx] = saved + options.step;
      const double plus = loss_and_grad();
      p.value[idx] = saved - options.step;
      const double minus = loss_and_grad();
      p.value[idx] = saved;
      const double numeric = (plus - minus) / (2.0 * options.step);
      const double exact = analytic[pi][idx];
      const double rel = std::abs(exact - numeric) / std::max(1e-8, std::abs(exact) + std::abs(numeric));
      ++result.coordinates_checked;
      if (rel > result.max_rel_error) {
        result.max_rel_error = rel;
        result.worst_parameter = p.name;
        result.worst_index = idx;
      }
    }
  }
  // Leave gradients consistent with the unperturbed parameters.
  loss_and_grad();
  return result;
}

}  // namespace mbridge

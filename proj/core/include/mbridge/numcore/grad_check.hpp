#pragma once

#include <cstdint>
#include <functional>
#include <string>

#include "mbridge/numcore/parameter.hpp"

namespace mbridge {

struct GradCheckOptions {
  double step = 1e-5;
  /// Coordinates sampled per tensor; tensors smaller than this are checked fully.
  std::size_t samples_per_tensor = 20;
  std::uint64_t seed = 0;
};

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::string worst_parameter;
  std::size_t worst_index = 0;
  std::size_t coordinates_checked = 0;
};

/// Central-difference gradient check.
///
/// `loss_and_grad` must zero gradients, run forward and backward, and return
/// the scalar loss. The relative error per coordinate is
/// |analytic − numeric| / max(1e-8, |analytic| + |numeric|).
GradCheckResult grad_check(const std::function<double()>& loss_and_grad,
                           const ParameterList& params, const GradCheckOptions& options = {});

}  // namespace mbridge

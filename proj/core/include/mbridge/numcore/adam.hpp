#pragma once

#include <cstdint>
#include <map>
#include <string>

#include "mbridge/numcore/parameter.hpp"

namespace mbridge {

struct AdamState {
  Tensor m;
  Tensor v;
  std::uint64_t step = 0;
  double lr = 5e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Bias-corrected Adam update of `p` in place.
///
/// The gradient is left untouched; the training loop zeroes it before the
/// next accumulation. Throws TrainingError naming the parameter when the
/// gradient holds a non-finite value.
void adam_step(Parameter& p, AdamState& state);

/// Adam over a fixed set of named parameters sharing one learning rate.
class Adam {
 public:
  Adam() = default;
  Adam(const ParameterList& params, double lr, double beta1 = 0.9, double beta2 = 0.999,
       double eps = 1e-8);

  void step(const ParameterList& params);
  void set_lr(double lr);
  double lr() const { return lr_; }

  const std::map<std::string, AdamState>& states() const { return states_; }
  std::map<std::string, AdamState>& states() { return states_; }

 private:
  double lr_ = 5e-4;
  std::map<std::string, AdamState> states_;
};

}  // namespace mbridge

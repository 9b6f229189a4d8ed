#pragma once

#include <string>
#include <vector>

#include "mbridge/numcore/rng.hpp"
#include "mbridge/numcore/tensor.hpp"

namespace mbridge {

/// A trainable tensor with its accumulated gradient.
struct Parameter {
  std::string name;
  Tensor value;
  Tensor grad;

  Parameter() = default;
  Parameter(std::string name, Shape shape)
      : name(std::move(name)), value(shape), grad(std::move(shape)) {}

  void zero_grad() { grad.zero(); }
  void init_uniform(Rng& rng, double bound);
};

using ParameterList = std::vector<Parameter*>;

void zero_grads(const ParameterList& params);
/// Throws InputError when two parameters share a name.
void check_unique_names(const ParameterList& params);
std::size_t parameter_count(const ParameterList& params);

}  // namespace mbridge

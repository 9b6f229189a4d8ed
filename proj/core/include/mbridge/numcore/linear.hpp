#pragma once

#include <string>

#include "mbridge/numcore/parameter.hpp"

namespace mbridge {

/// Affine map y = x·Wᵀ + b applied to each row of x.
///
/// Weight layout is [out×in] so that a single vector input reads as W·x + b.
struct Linear {
  Parameter weight;
  Parameter bias;

  Linear() = default;
  Linear(const std::string& name, std::size_t in_dim, std::size_t out_dim);

  std::size_t in_dim() const { return weight.value.cols(); }
  std::size_t out_dim() const { return weight.value.rows(); }

  /// x is [B×in] or a length-in vector (treated as B = 1); returns [B×out].
  Tensor forward(const Tensor& x) const;
  /// Accumulates parameter gradients; returns dL/dx with the shape of x.
  Tensor backward(const Tensor& x, const Tensor& grad_out);

  ParameterList parameters() { return {&weight, &bias}; }
};

}  // namespace mbridge

#include "mbridge/numcore/linear.hpp"

#include "mbridge/numcore/errors.hpp"
#include "mbridge/numcore/ops.hpp"

namespace mbridge {

Linear::Linear(const std::string& name, std::size_t in_dim, std::size_t out_dim)
    : weight(name + ".W", {out_dim, in_dim}), bias(name + ".b", {out_dim}) {}

Tensor Linear::forward(const Tensor& x) const {
  if (x.cols() != in_dim()) {
    throw DimensionError("Linear " + weight.name + ": input " + shape_to_string(x.shape()) +
                         " vs weight " + shape_to_string(weight.value.shape()));
  }
  const Tensor x2 = x.rank() == 1 ? x.reshaped({1, x.size()}) : x;
  Tensor y = matmul_nt(x2, weight.value);
  add_row_bias(y, bias.value);
  return x.rank() == 1 ? y.reshaped({out_dim()}) : y;
}

Tensor Linear::backward(const Tensor& x, const Tensor& grad_out) {
  const Tensor x2 = x.rank() == 1 ? x.reshaped({1, x.size()}) : x;
  const Tensor g2 = grad_out.rank() == 1 ? grad_out.reshaped({1, grad_out.size()}) : grad_out;
  if (g2.rows() != x2.rows() || g2.cols() != out_dim()) {
    throw DimensionError("Linear " + weight.name + " backward: grad " +
                         shape_to_string(grad_out.shape()) + " vs input " + shape_to_string(x.shape()));
  }
  gemm_tn_accumulate(g2, x2, weight.grad);
  add_row_bias_backward(g2, bias.grad);
  Tensor dx = matmul(g2, weight.value);
  return x.rank() == 1 ? dx.reshaped({in_dim()}) : dx;
}

}  // namespace mbridge

#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "mbridge/numcore/tensor.hpp"

namespace mbridge {

using TokenId = std::int32_t;

// Matrix products. Backward rules accumulate into the gradient outputs, so
// callers zero them between optimizer steps.

/// C = A·B for A [m×k], B [k×n].
Tensor matmul(const Tensor& a, const Tensor& b);
/// dA += dC·Bᵀ, dB += Aᵀ·dC. Either output may be null.
void matmul_backward(const Tensor& a, const Tensor& b, const Tensor& grad_out,
                     Tensor* grad_a, Tensor* grad_b);

/// C = A·Bᵀ for A [m×k], B [n×k].
Tensor matmul_nt(const Tensor& a, const Tensor& b);
/// C += alpha·A·Bᵀ for A [m×k], B [n×k]; C must be [m×n].
void gemm_nt_accumulate(const Tensor& a, const Tensor& b, Tensor& c, double alpha = 1.0);
/// C += alpha·Aᵀ·B for A [k×m], B [k×n]; C must be [m×n].
void gemm_tn_accumulate(const Tensor& a, const Tensor& b, Tensor& c, double alpha = 1.0);
/// C += alpha·A·B for A [m×k], B [k×n]; C must be [m×n].
void gemm_nn_accumulate(const Tensor& a, const Tensor& b, Tensor& c, double alpha = 1.0);

/// Adds a length-n bias to every row of an [m×n] matrix in place.
void add_row_bias(Tensor& x, const Tensor& bias);
/// grad_bias += column sums of grad_out.
void add_row_bias_backward(const Tensor& grad_out, Tensor& grad_bias);

/// Elementwise max(0, x).
Tensor relu(const Tensor& x);
/// Upstream gradient where x > 0, zero elsewhere (subgradient 0 at x == 0).
Tensor relu_backward(const Tensor& x, const Tensor& grad_out);

double sigmoid(double x);
Tensor sigmoid(const Tensor& x);
Tensor tanh(const Tensor& x);

/// Max-shifted softmax over a single vector.
std::vector<double> softmax(std::span<const double> logits);
/// Max-shifted log-softmax over a single vector.
std::vector<double> log_softmax(std::span<const double> logits);

/// −log softmax(logits)[target]. Throws IndexError for an out-of-range target.
double softmax_cross_entropy(std::span<const double> logits, TokenId target);
/// softmax(logits) − onehot(target), scaled by `scale`, written into grad.
void softmax_cross_entropy_backward(std::span<const double> logits, TokenId target,
                                    std::span<double> grad, double scale = 1.0);

/// Rows of `table` selected by ids, stacked into [ids.size()×cols].
Tensor gather_rows(const Tensor& table, std::span<const TokenId> ids);
/// table_grad[ids[r]] += grad[r] for every row r.
void scatter_add_rows(Tensor& table_grad, std::span<const TokenId> ids, const Tensor& grad);

/// Index of the largest entry; ties resolve to the lowest index.
std::size_t argmax(std::span<const double> values);

}  // namespace mbridge

#include "mbridge/numcore/ops.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <limits>

#include "mbridge/numcore/errors.hpp"

namespace mbridge {

namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const RowMatrix>;
using MutMap = Eigen::Map<RowMatrix>;

ConstMap as_matrix(const Tensor& t) {
  return ConstMap(t.data().data(), static_cast<Eigen::Index>(t.rows()),
                  static_cast<Eigen::Index>(t.cols()));
}

MutMap as_matrix(Tensor& t) {
  return MutMap(t.data().data(), static_cast<Eigen::Index>(t.rows()),
                static_cast<Eigen::Index>(t.cols()));
}

void require_matrix(const Tensor& t, const char* what) {
  if (t.rank() != 2) {
    throw DimensionError(std::string(what) + " must be a matrix, got " + shape_to_string(t.shape()));
  }
}

[[noreturn]] void mismatch(const char* op, const Tensor& a, const Tensor& b) {
  throw DimensionError(std::string(op) + ": incompatible shapes " + shape_to_string(a.shape()) +
                       " and " + shape_to_string(b.shape()));
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_matrix(a, "matmul lhs");
  require_matrix(b, "matmul rhs");
  if (a.cols() != b.rows()) mismatch("matmul", a, b);
  Tensor c({a.rows(), b.cols()});
  as_matrix(c).noalias() = as_matrix(a) * as_matrix(b);
  return c;
}

void matmul_backward(const Tensor& a, const Tensor& b, const Tensor& grad_out, Tensor* grad_a,
                     Tensor* grad_b) {
  if (grad_out.rank() != 2 || grad_out.rows() != a.rows() || grad_out.cols() != b.cols()) {
    mismatch("matmul_backward", a, grad_out);
  }
  if (grad_a) {
    if (grad_a->shape() != a.shape()) mismatch("matmul_backward grad_a", a, *grad_a);
    as_matrix(*grad_a).noalias() += as_matrix(grad_out) * as_matrix(b).transpose();
  }
  if (grad_b) {
    if (grad_b->shape() != b.shape()) mismatch("matmul_backward grad_b", b, *grad_b);
    as_matrix(*grad_b).noalias() += as_matrix(a).transpose() * as_matrix(grad_out);
  }
}

Tensor matmul_nt(const Tensor& a, const Tensor& b) {
  if (a.cols() != b.cols() || b.rank() != 2) mismatch("matmul_nt", a, b);
  Tensor c({a.rows(), b.rows()});
  as_matrix(c).noalias() = as_matrix(a) * as_matrix(b).transpose();
  return c;
}

void gemm_nt_accumulate(const Tensor& a, const Tensor& b, Tensor& c, double alpha) {
  if (a.cols() != b.cols() || c.rows() != a.rows() || c.cols() != b.rows()) {
    mismatch("gemm_nt_accumulate", a, b);
  }
  as_matrix(c).noalias() += alpha * (as_matrix(a) * as_matrix(b).transpose());
}

void gemm_tn_accumulate(const Tensor& a, const Tensor& b, Tensor& c, double alpha) {
  if (a.rows() != b.rows() || c.rows() != a.cols() || c.cols() != b.cols()) {
    mismatch("gemm_tn_accumulate", a, b);
  }
  as_matrix(c).noalias() += alpha * (as_matrix(a).transpose() * as_matrix(b));
}

void gemm_nn_accumulate(const Tensor& a, const Tensor& b, Tensor& c, double alpha) {
  if (a.cols() != b.rows() || c.rows() != a.rows() || c.cols() != b.cols()) {
    mismatch("gemm_nn_accumulate", a, b);
  }
  as_matrix(c).noalias() += alpha * (as_matrix(a) * as_matrix(b));
}

void add_row_bias(Tensor& x, const Tensor& bias) {
  const auto n = x.cols();
  if (bias.size() != n) mismatch("add_row_bias", x, bias);
  auto data = x.data();
  for (std::size_t r = 0; r < x.rows(); ++r) {
    for (std::size_t j = 0; j < n; ++j) data[r * n + j] += bias[j];
  }
}

void add_row_bias_backward(const Tensor& grad_out, Tensor& grad_bias) {
  const auto n = grad_out.cols();
  if (grad_bias.size() != n) mismatch("add_row_bias_backward", grad_out, grad_bias);
  for (std::size_t r = 0; r < grad_out.rows(); ++r) {
    for (std::size_t j = 0; j < n; ++j) grad_bias[j] += grad_out[r * n + j];
  }
}

Tensor relu(const Tensor& x) {
  Tensor y = x;
  for (auto& v : y.data()) v = v > 0.0 ? v : 0.0;
  return y;
}

Tensor relu_backward(const Tensor& x, const Tensor& grad_out) {
  if (x.shape() != grad_out.shape()) mismatch("relu_backward", x, grad_out);
  Tensor g = grad_out;
  for (std::size_t i = 0; i < g.size(); ++i) {
    if (!(x[i] > 0.0)) g[i] = 0.0;
  }
  return g;
}

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

Tensor sigmoid(const Tensor& x) {
  Tensor y = x;
  for (auto& v : y.data()) v = sigmoid(v);
  return y;
}

Tensor tanh(const Tensor& x) {
  Tensor y = x;
  for (auto& v : y.data()) v = std::tanh(v);
  return y;
}

std::vector<double> softmax(std::span<const double> logits) {
  std::vector<double> out(logits.size());
  if (logits.empty()) return out;
  const double peak = *std::max_element(logits.begin(), logits.end());
  double total = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    out[i] = std::exp(logits[i] - peak);
    total += out[i];
  }
  for (auto& v : out) v /= total;
  return out;
}

std::vector<double> log_softmax(std::span<const double> logits) {
  std::vector<double> out(logits.size());
  if (logits.empty()) return out;
  const double peak = *std::max_element(logits.begin(), logits.end());
  double total = 0.0;
  for (double v : logits) total += std::exp(v - peak);
  const double log_norm = peak + std::log(total);
  for (std::size_t i = 0; i < logits.size(); ++i) out[i] = logits[i] - log_norm;
  return out;
}

double softmax_cross_entropy(std::span<const double> logits, TokenId target) {
  if (target < 0 || static_cast<std::size_t>(target) >= logits.size()) {
    throw IndexError("softmax_cross_entropy: target " + std::to_string(target) +
                     " outside [0, " + std::to_string(logits.size()) + ")");
  }
  const double peak = *std::max_element(logits.begin(), logits.end());
  double total = 0.0;
  for (double v : logits) total += std::exp(v - peak);
  return std::log(total) - (logits[static_cast<std::size_t>(target)] - peak);
}

void softmax_cross_entropy_backward(std::span<const double> logits, TokenId target,
                                    std::span<double> grad, double scale) {
  if (target < 0 || static_cast<std::size_t>(target) >= logits.size()) {
    throw IndexError("softmax_cross_entropy_backward: target " + std::to_string(target) +
                     " outside [0, " + std::to_string(logits.size()) + ")");
  }
  if (grad.size() != logits.size()) throw DimensionError("softmax_cross_entropy_backward: grad size");
  const auto probs = softmax(logits);
  for (std::size_t i = 0; i < probs.size(); ++i) grad[i] = scale * probs[i];
  grad[static_cast<std::size_t>(target)] -= scale;
}

Tensor gather_rows(const Tensor& table, std::span<const TokenId> ids) {
  const auto n = table.rows();
  const auto d = table.cols();
  Tensor out({ids.size(), d});
  for (std::size_t r = 0; r < ids.size(); ++r) {
    if (ids[r] < 0 || static_cast<std::size_t>(ids[r]) >= n) {
      throw IndexError("gather_rows: id " + std::to_string(ids[r]) + " outside table of " +
                       std::to_string(n) + " rows");
    }
    const auto src = table.row(static_cast<std::size_t>(ids[r]));
    std::copy(src.begin(), src.end(), out.row(r).begin());
  }
  return out;
}

void scatter_add_rows(Tensor& table_grad, std::span<const TokenId> ids, const Tensor& grad) {
  if (grad.rows() != ids.size() || grad.cols() != table_grad.cols()) {
    mismatch("scatter_add_rows", table_grad, grad);
  }
  for (std::size_t r = 0; r < ids.size(); ++r) {
    auto dst = table_grad.row(static_cast<std::size_t>(ids[r]));
    const auto src = grad.row(r);
    for (std::size_t j = 0; j < dst.size(); ++j) dst[j] += src[j];
  }
}

std::size_t argmax(std::span<const double> values) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < values.size(); ++i) {
    if (values[i] > values[best]) best = i;
  }
  return best;
}

}  // namespace mbridge

#include "mbridge/mtm/modality_loss.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <numeric>
#include <vector>

#include "mbridge/numcore/errors.hpp"
#include "mbridge/numcore/ops.hpp"

namespace mbridge::mtm {

namespace {

void require_same_length(std::span<const double> a, std::span<const double> b, std::span<double> grad,
                         const char* op) {
  if (a.size() != b.size() || a.empty()) {
    throw DimensionError(std::string(op) + ": operand lengths " + std::to_string(a.size()) + " and " +
                         std::to_string(b.size()));
  }
  if (!grad.empty() && grad.size() != a.size()) {
    throw DimensionError(std::string(op) + ": gradient length " + std::to_string(grad.size()));
  }
}

double squared_distance(std::span<const double> a, std::span<const double> b) {
  double total = 0.0;
  for (std::size_t j = 0; j < a.size(); ++j) {
    const double diff = a[j] - b[j];
    total += diff * diff;
  }
  return total;
}

}  // namespace

std::string_view to_string(ModalityLossKind kind) {
  switch (kind) {
    case ModalityLossKind::MSE: return "mse";
    case ModalityLossKind::MAE: return "mae";
    case ModalityLossKind::COS: return "cos";
    case ModalityLossKind::KLD: return "kld";
    case ModalityLossKind::MMD: return "mmd";
  }
  return "unknown";
}

ModalityLossKind parse_loss_kind(std::string_view name) {
  std::string lower(name);
  std::transform(lower.begin(), lower.end(), lower.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  for (const auto kind : kAllLossKinds) {
    if (lower == to_string(kind)) return kind;
  }
  throw InputError("unknown modality loss '" + std::string(name) + "' (expected mse, mae, cos, kld or mmd)");
}

double mse_loss(std::span<const double> pred, std::span<const double> target, std::span<double> grad) {
  require_same_length(pred, target, grad, "mse_loss");
  const double inv_d = 1.0 / static_cast<double>(pred.size());
  double total = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double diff = pred[i] - target[i];
    total += diff * diff;
    if (!grad.empty()) grad[i] = 2.0 * diff * inv_d;
  }
  return total * inv_d;
}

double mae_loss(std::span<const double> pred, std::span<const double> target, std::span<double> grad) {
  require_same_length(pred, target, grad, "mae_loss");
  const double inv_d = 1.0 / static_cast<double>(pred.size());
  double total = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double diff = pred[i] - target[i];
    total += std::abs(diff);
    if (!grad.empty()) grad[i] = diff > 0.0 ? inv_d : (diff < 0.0 ? -inv_d : 0.0);
  }
  return total * inv_d;
}

double cos_loss(std::span<const double> pred, std::span<const double> target, std::span<double> grad) {
  require_same_length(pred, target, grad, "cos_loss");
  double dot = 0.0, pp = 0.0, tt = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    dot += pred[i] * target[i];
    pp += pred[i] * pred[i];
    tt += target[i] * target[i];
  }
  if (pp == 0.0 || tt == 0.0) throw InputError("cos_loss: zero-norm vector");
  const double np = std::sqrt(pp);
  const double nt = std::sqrt(tt);
  const double cosine = dot / (np * nt);
  if (!grad.empty()) {
    for (std::size_t i = 0; i < pred.size(); ++i) {
      grad[i] = -(target[i] / (np * nt) - cosine * pred[i] / pp);
    }
  }
  return 1.0 - cosine;
}

double kld_loss(std::span<const double> pred, std::span<const double> target, std::span<double> grad) {
  require_same_length(pred, target, grad, "kld_loss");
  const auto log_p = log_softmax(target);
  const auto log_q = log_softmax(pred);
  double total = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double p = std::exp(log_p[i]);
    total += p * (log_p[i] - log_q[i]);
    if (!grad.empty()) grad[i] = std::exp(log_q[i]) - p;
  }
  return std::max(total, 0.0);
}

MmdValue mmd_loss(const Tensor& pred, const Tensor& target) {
  if (pred.rank() != 2 || pred.shape() != target.shape()) {
    throw DimensionError("mmd_loss: shapes " + shape_to_string(pred.shape()) + " and " +
                         shape_to_string(target.shape()));
  }
  const std::size_t b = pred.rows();
  const std::size_t d = pred.cols();
  if (b < 2) throw InputError("mmd_loss needs a batch of at least 2 samples");

  // Points 0..b-1 are predictions, b..2b-1 targets.
  auto point = [&](std::size_t i) { return i < b ? pred.row(i) : target.row(i - b); };
  const std::size_t n = 2 * b;

  struct Pair {
    double dist;
    std::size_t p, q;
  };
  std::vector<Pair> pairs;
  pairs.reserve(n * (n - 1) / 2);
  for (std::size_t p = 0; p < n; ++p) {
    for (std::size_t q = p + 1; q < n; ++q) pairs.push_back({std::sqrt(squared_distance(point(p), point(q))), p, q});
  }
  const std::size_t mid = (pairs.size() - 1) / 2;
  std::nth_element(pairs.begin(), pairs.begin() + static_cast<std::ptrdiff_t>(mid), pairs.end(),
                   [](const Pair& a, const Pair& c) {
                     if (a.dist != c.dist) return a.dist < c.dist;
                     return a.p != c.p ? a.p < c.p : a.q < c.q;
                   });
  const Pair median = pairs[mid];
  const bool fixed_bandwidth = median.dist == 0.0;
  const double sigma = fixed_bandwidth ? 1.0 : median.dist;
  const double gamma = 1.0 / (2.0 * sigma * sigma);
  const double inv_b2 = 1.0 / static_cast<double>(b * b);

  MmdValue out;
  out.bandwidth = sigma;
  out.grad = Tensor({b, d});
  double sum_xx = 0.0, sum_yy = 0.0, sum_xy = 0.0;
  double dgamma = 0.0;  // ∂L/∂γ
  for (std::size_t i = 0; i < b; ++i) {
    auto gi = out.grad.row(i);
    for (std::size_t j = 0; j < b; ++j) {
      const double dxx = squared_distance(pred.row(i), pred.row(j));
      const double kxx = std::exp(-gamma * dxx);
      const double dyy = squared_distance(target.row(i), target.row(j));
      const double kyy = std::exp(-gamma * dyy);
      const double dxy = squared_distance(pred.row(i), target.row(j));
      const double kxy = std::exp(-gamma * dxy);
      sum_xx += kxx;
      sum_yy += kyy;
      sum_xy += kxy;
      dgamma += -kxx * dxx - kyy * dyy + 2.0 * kxy * dxy;
      const auto xi = pred.row(i);
      const auto xj = pred.row(j);
      const auto yj = target.row(j);
      for (std::size_t c = 0; c < d; ++c) {
        gi[c] += -4.0 * gamma * inv_b2 * (kxx * (xi[c] - xj[c]) - kxy * (xi[c] - yj[c]));
      }
    }
  }
  out.value = inv_b2 * (sum_xx + sum_yy - 2.0 * sum_xy);

  if (!fixed_bandwidth) {
    // γ = 1/(2σ²), σ = ‖z_p − z_q‖ for the median pair.
    const double dsigma = inv_b2 * dgamma * (-1.0 / (sigma * sigma * sigma));
    const auto zp = point(median.p);
    const auto zq = point(median.q);
    for (std::size_t c = 0; c < d; ++c) {
      const double unit = (zp[c] - zq[c]) / sigma;
      if (median.p < b) out.grad.row(median.p)[c] += dsigma * unit;
      if (median.q < b) out.grad.row(median.q)[c] -= dsigma * unit;
    }
  }
  return out;
}

LossValue modality_loss(ModalityLossKind kind, const Tensor& pred, const Tensor& target) {
  if (pred.shape() != target.shape() || pred.rank() > 2) {
    throw DimensionError("modality_loss: shapes " + shape_to_string(pred.shape()) + " and " +
                         shape_to_string(target.shape()));
  }
  if (kind == ModalityLossKind::MMD) {
    if (pred.rank() == 1) throw InputError("MMD modality loss needs a batch of at least 2 samples");
    auto mmd = mmd_loss(pred, target);
    return {mmd.value, std::move(mmd.grad)};
  }
  const std::size_t rows = pred.rows();
  const double scale = 1.0 / static_cast<double>(rows);
  LossValue out{0.0, Tensor(pred.shape())};
  for (std::size_t r = 0; r < rows; ++r) {
    const auto p = pred.row(r);
    const auto t = target.row(r);
    auto g = out.grad.row(r);
    double v = 0.0;
    switch (kind) {
      case ModalityLossKind::MSE: v = mse_loss(p, t, g); break;
      case ModalityLossKind::MAE: v = mae_loss(p, t, g); break;
      case ModalityLossKind::COS: v = cos_loss(p, t, g); break;
      case ModalityLossKind::KLD: v = kld_loss(p, t, g); break;
      case ModalityLossKind::MMD: break;
    }
    out.value += v * scale;
  }
  out.grad *= scale;
  return out;
}

}  // namespace mbridge::mtm

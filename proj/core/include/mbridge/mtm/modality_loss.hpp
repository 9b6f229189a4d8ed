#pragma once

#include <span>
#include <string>
#include <string_view>

#include "mbridge/numcore/tensor.hpp"

namespace mbridge::mtm {

enum class ModalityLossKind { MSE, MAE, COS, KLD, MMD };

inline constexpr ModalityLossKind kAllLossKinds[] = {ModalityLossKind::MSE, ModalityLossKind::MAE,
                                                     ModalityLossKind::COS, ModalityLossKind::KLD,
                                                     ModalityLossKind::MMD};

std::string_view to_string(ModalityLossKind kind);
/// Accepts "mse", "mae", "cos", "kld", "mmd" (any case). Throws InputError.
ModalityLossKind parse_loss_kind(std::string_view name);

/// Loss value and its gradient with respect to the prediction.
struct LossValue {
  double value = 0.0;
  Tensor grad;
};

// Single-sample divergences between a predicted code and a target code.
// `grad`, when non-empty, receives dL/dpred. The target never gets a gradient.

/// (1/d) Σ (p − t)²
double mse_loss(std::span<const double> pred, std::span<const double> target, std::span<double> grad = {});
/// (1/d) Σ |p − t|, subgradient 0 where p == t.
double mae_loss(std::span<const double> pred, std::span<const double> target, std::span<double> grad = {});
/// 1 − cos(p, t). Throws InputError when either vector has zero norm.
double cos_loss(std::span<const double> pred, std::span<const double> target, std::span<double> grad = {});
/// KL(softmax(t) ‖ softmax(p)).
double kld_loss(std::span<const double> pred, std::span<const double> target, std::span<double> grad = {});

struct MmdValue {
  double value = 0.0;
  double bandwidth = 0.0;
  Tensor grad;  // dL/dpred, [B×d]
};

/// Biased squared MMD between the rows of pred and target with an RBF kernel
/// k(a, b) = exp(−‖a − b‖² / (2σ²)). σ is the lower median of all pairwise
/// distances among the 2B rows (1 when that median is 0); its dependence on
/// pred is included in the gradient. Throws InputError for B < 2.
MmdValue mmd_loss(const Tensor& pred, const Tensor& target);

/// Modality loss for one sample (rank-1 operands) or a batch (rank-2, one
/// sample per row). Per-sample kinds are averaged over the batch; MMD is a
/// batch statistic and needs at least two rows.
LossValue modality_loss(ModalityLossKind kind, const Tensor& pred, const Tensor& target);

}  // namespace mbridge::mtm

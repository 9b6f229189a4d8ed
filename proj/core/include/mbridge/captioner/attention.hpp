#pragma once

#include <span>
#include <string>

#include "mbridge/numcore/parameter.hpp"

namespace mbridge::captioner {

/// Additive attention over region features:
///   score_i = w · tanh(W_h·h + W_v·v_i + b),  weights = softmax(score).
///
/// A generic Bahdanau-style scorer, not the two-LSTM TopDown stack.
struct AttentionParams {
  Parameter w_h;    // [d_a×d_h]
  Parameter w_v;    // [d_a×d_v]
  Parameter bias;   // [d_a]
  Parameter score;  // [d_a]

  AttentionParams() = default;
  AttentionParams(const std::string& name, std::size_t d_h, std::size_t d_v, std::size_t d_a);

  std::size_t query_dim() const { return w_h.value.cols(); }
  std::size_t region_dim() const { return w_v.value.cols(); }
  std::size_t attn_dim() const { return w_h.value.rows(); }

  ParameterList parameters() { return {&w_h, &w_v, &bias, &score}; }
};

struct AttentionResult {
  Tensor context;  // [d_v]
  Tensor weights;  // [K]
};

/// Attends from query h [d_h] over the rows of V [K×d_v].
AttentionResult attend(const AttentionParams& params, const Tensor& query, const Tensor& regions);

/// Region projection W_v·v_i + b for every row, [K×d_a]. Constant across
/// decode steps, so callers compute it once per sample.
Tensor project_regions(const AttentionParams& params, const Tensor& regions);

struct AttentionStepCache {
  Tensor activations;  // tanh(...) [K×d_a]
  Tensor weights;      // [K]
};

/// Attention for a single sample from a precomputed query projection
/// W_h·h [d_a] and region projection [K×d_a].
AttentionResult attend_projected(const AttentionParams& params, std::span<const double> query_proj,
                                 const Tensor& region_proj, const Tensor& regions,
                                 AttentionStepCache* cache = nullptr);

/// Backward of attend_projected given dL/dcontext. Adds to dL/dscore-vector
/// directly, accumulates dL/d(query projection) into grad_query_proj and
/// accumulates dL/d(region projection) into grad_region_proj.
void attend_projected_backward(AttentionParams& params, const AttentionStepCache& cache,
                               const Tensor& regions, std::span<const double> grad_context,
                               std::span<double> grad_query_proj, Tensor& grad_region_proj);

/// Finishes the region-projection backward: W_v and b gradients from the
/// gradient accumulated over all steps for one sample.
void project_regions_backward(AttentionParams& params, const Tensor& regions, const Tensor& grad_region_proj);

}  // namespace mbridge::captioner

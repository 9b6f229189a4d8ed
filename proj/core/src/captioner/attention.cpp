#include "mbridge/captioner/attention.hpp"

#include <cmath>

#include "mbridge/numcore/errors.hpp"
#include "mbridge/numcore/ops.hpp"

namespace mbridge::captioner {

AttentionParams::AttentionParams(const std::string& name, std::size_t d_h, std::size_t d_v, std::size_t d_a)
    : w_h(name + ".W_h", {d_a, d_h}),
      w_v(name + ".W_v", {d_a, d_v}),
      bias(name + ".b", {d_a}),
      score(name + ".w", {d_a}) {}

Tensor project_regions(const AttentionParams& params, const Tensor& regions) {
  if (regions.rank() != 2 || regions.cols() != params.region_dim()) {
    throw DimensionError("attention regions " + shape_to_string(regions.shape()) + " vs d_v " +
                         std::to_string(params.region_dim()));
  }
  Tensor proj = matmul_nt(regions, params.w_v.value);
  add_row_bias(proj, params.bias.value);
  return proj;
}

AttentionResult attend_projected(const AttentionParams& params, std::span<const double> query_proj,
                                 const Tensor& region_proj, const Tensor& regions, AttentionStepCache* cache) {
  const std::size_t k = regions.rows();
  const std::size_t d_a = params.attn_dim();
  const std::size_t d_v = regions.cols();
  Tensor activations({k, d_a});
  std::vector<double> scores(k, 0.0);
  for (std::size_t i = 0; i < k; ++i) {
    const auto proj = region_proj.row(i);
    auto act = activations.row(i);
    double s = 0.0;
    for (std::size_t a = 0; a < d_a; ++a) {
      act[a] = std::tanh(query_proj[a] + proj[a]);
      s += params.score.value[a] * act[a];
    }
    scores[i] = s;
  }
  Tensor weights = Tensor::vector(softmax(scores));
  Tensor context({d_v});
  for (std::size_t i = 0; i < k; ++i) {
    const auto v = regions.row(i);
    for (std::size_t j = 0; j < d_v; ++j) context[j] += weights[i] * v[j];
  }
  if (cache) *cache = AttentionStepCache{std::move(activations), weights};
  return {std::move(context), std::move(weights)};
}

void attend_projected_backward(AttentionParams& params, const AttentionStepCache& cache,
                               const Tensor& regions, std::span<const double> grad_context,
                               std::span<double> grad_query_proj, Tensor& grad_region_proj) {
  const std::size_t k = regions.rows();
  const std::size_t d_a = params.attn_dim();
  std::vector<double> grad_weight(k, 0.0);
  for (std::size_t i = 0; i < k; ++i) {
    const auto v = regions.row(i);
    double g = 0.0;
    for (std::size_t j = 0; j < v.size(); ++j) g += grad_context[j] * v[j];
    grad_weight[i] = g;
  }
  double weighted = 0.0;
  for (std::size_t i = 0; i < k; ++i) weighted += cache.weights[i] * grad_weight[i];
  for (std::size_t i = 0; i < k; ++i) {
    const double grad_score = cache.weights[i] * (grad_weight[i] - weighted);
    const auto act = cache.activations.row(i);
    auto grad_proj = grad_region_proj.row(i);
    for (std::size_t a = 0; a < d_a; ++a) {
      params.score.grad[a] += grad_score * act[a];
      const double grad_pre = grad_score * params.score.value[a] * (1.0 - act[a] * act[a]);
      grad_query_proj[a] += grad_pre;
      grad_proj[a] += grad_pre;
    }
  }
}

void project_regions_backward(AttentionParams& params, const Tensor& regions, const Tensor& grad_region_proj) {
  gemm_tn_accumulate(grad_region_proj, regions, params.w_v.grad);
  add_row_bias_backward(grad_region_proj, params.bias.grad);
}

AttentionResult attend(const AttentionParams& params, const Tensor& query, const Tensor& regions) {
  if (query.size() != params.query_dim()) {
    throw DimensionError("attention query " + shape_to_string(query.shape()) + " vs d_h " +
                         std::to_string(params.query_dim()));
  }
  const Tensor region_proj = project_regions(params, regions);
  const Tensor query_proj = matmul_nt(query.reshaped({1, query.size()}), params.w_h.value);
  return attend_projected(params, query_proj.row(0), region_proj, regions);
}

}  // namespace mbridge::captioner

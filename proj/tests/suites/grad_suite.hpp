#pragma once

// Finite-difference checks over every differentiable operation. Shared by
// the unit tests and the acceptance runner.

#include <string>
#include <vector>

#include "mbridge/captioner/attention.hpp"
#include "mbridge/captioner/captioner.hpp"
#include "mbridge/mtm/modality_loss.hpp"
#include "mbridge/mtm/mtm.hpp"
#include "mbridge/numcore/grad_check.hpp"
#include "mbridge/numcore/lstm.hpp"
#include "mbridge/numcore/ops.hpp"
#include "suites/fixtures.hpp"
#include "support.hpp"

namespace suites {

using namespace mbridge;

struct GradCase {
  std::string name;
  double max_rel_error = 0.0;
  std::size_t coordinates = 0;
};

inline GradCase record(std::string name, const GradCheckResult& r) {
  return {std::move(name), r.max_rel_error, r.coordinates_checked};
}

// Random linear functional of `out`, with its gradient written to `grad`.
inline double probe(const Tensor& out, const Tensor& weights) {
  double s = 0.0;
  for (std::size_t i = 0; i < out.size(); ++i) s += weights[i] * out[i];
  return s;
}

inline GradCase check_lstm_cell() {
  Rng rng(101);
  LstmParams p("cell", 3, 4);
  for (auto* q : p.parameters()) q->init_uniform(rng, 0.5);
  Parameter x("x", {2, 3}), h("h", {2, 4}), c("c", {2, 4});
  x.value = testing::random_tensor(rng, {2, 3});
  h.value = testing::random_tensor(rng, {2, 4}, 0.5);
  c.value = testing::random_tensor(rng, {2, 4}, 0.5);
  const auto wh = testing::random_tensor(rng, {2, 4});
  const auto wc = testing::random_tensor(rng, {2, 4});
  ParameterList params = p.parameters();
  params.insert(params.end(), {&x, &h, &c});
  const auto f = [&] {
    zero_grads(params);
    LstmStepCache cache;
    const auto out = lstm_cell(p, x.value, h.value, c.value, &cache);
    const auto g = lstm_cell_backward(p, cache, wh, wc);
    x.grad += g.x;
    h.grad += g.h_prev;
    c.grad += g.c_prev;
    return probe(out.h, wh) + probe(out.c, wc);
  };
  return record("lstm cell", grad_check(f, params));
}

inline GradCase check_cross_entropy() {
  Rng rng(102);
  Parameter logits("logits", {7});
  logits.value = testing::random_tensor(rng, {7}, 2.0);
  const auto f = [&] {
    logits.zero_grad();
    softmax_cross_entropy_backward(logits.value.data(), 4, logits.grad.data());
    return softmax_cross_entropy(logits.value.data(), 4);
  };
  return record("cross-entropy", grad_check(f, {&logits}));
}

inline GradCase check_projector() {
  Rng rng(103);
  mtm::MtmModel m(5, 4);
  m.init_uniform(rng, 0.5);
  Parameter input("v", {3, 5});
  input.value = testing::random_tensor(rng, {3, 5});
  const auto weight = testing::random_tensor(rng, {3, 4});
  ParameterList params = m.parameters();
  params.push_back(&input);
  const auto f = [&] {
    zero_grads(params);
    mtm::MtmCache cache;
    const auto out = m.forward(input.value, &cache);
    input.grad += m.backward(cache, weight);
    return probe(out, weight);
  };
  return record("projector", grad_check(f, params));
}

inline GradCase check_modality_loss(mtm::ModalityLossKind kind) {
  Rng rng(104 + static_cast<std::uint64_t>(kind));
  Parameter pred("pred", {4, 6});
  pred.value = testing::random_tensor(rng, {4, 6});
  const auto target = testing::random_tensor(rng, {4, 6});
  const auto f = [&] {
    pred.zero_grad();
    auto lv = mtm::modality_loss(kind, pred.value, target);
    pred.grad += lv.grad;
    return lv.value;
  };
  return record("modality loss " + std::string(mtm::to_string(kind)), grad_check(f, {&pred}, {1e-5, 24, 0}));
}

inline GradCase check_attention() {
  Rng rng(110);
  const std::size_t d_h = 4, d_v = 3, d_a = 5, k = 4;
  captioner::AttentionParams att("att", d_h, d_v, d_a);
  for (auto* q : att.parameters()) q->init_uniform(rng, 0.7);
  Parameter query("h", {1, d_h});
  query.value = testing::random_tensor(rng, {1, d_h});
  const auto regions = testing::random_tensor(rng, {k, d_v});
  const auto weight = testing::random_tensor(rng, {d_v});
  ParameterList params = att.parameters();
  params.push_back(&query);
  const auto f = [&] {
    zero_grads(params);
    const Tensor qp = matmul_nt(query.value, att.w_h.value);
    const Tensor rp = captioner::project_regions(att, regions);
    captioner::AttentionStepCache cache;
    const auto res = captioner::attend_projected(att, qp.row(0), rp, regions, &cache);
    Tensor grad_qp({1, d_a});
    Tensor grad_rp({k, d_a});
    captioner::attend_projected_backward(att, cache, regions, weight.data(), grad_qp.row(0), grad_rp);
    captioner::project_regions_backward(att, regions, grad_rp);
    gemm_tn_accumulate(grad_qp, query.value, att.w_h.grad);
    gemm_nn_accumulate(grad_qp, att.w_h.value, query.grad);
    return probe(res.context, weight);
  };
  return record("attention", grad_check(f, params));
}

inline GradCase check_captioner(bool attention, mtm::ModalityLossKind kind) {
  const auto groups = fixtures::samples_by_length(7, 40);
  const auto& group = groups.rbegin()->second;
  std::vector<const CaptionSample*> batch;
  for (std::size_t i = 0; i < std::min<std::size_t>(3, group.size()); ++i) batch.push_back(&group[i]);
  // A wide init keeps sampled gradients above ~1e-6; near-zero coordinates
  // are dominated by roundoff in the central difference at h = 1e-5.
  auto models = captioner::init_models(fixtures::small_captioner(attention, true), 16, 6, true, 3, 0.6);
  Rng rng(111);
  const auto codes = testing::random_tensor(rng, {batch.size(), 6}, 0.5);
  ParameterList params = models.cap.parameters();
  for (auto* p : models.mtm->parameters()) params.push_back(p);
  const auto f = [&] {
    zero_grads(params);
    return captioner::forward_train_batch(models.cap, &*models.mtm, batch, codes, kind, true).total;
  };
  return record(std::string("captioner step") + (attention ? " with attention" : "") + " (" +
                    std::string(mtm::to_string(kind)) + ")",
                grad_check(f, params, {1e-5, 20, 0}));
}

inline std::vector<GradCase> run_grad_suite() {
  std::vector<GradCase> out;
  out.push_back(check_lstm_cell());
  out.push_back(check_cross_entropy());
  out.push_back(check_projector());
  for (const auto kind : mtm::kAllLossKinds) out.push_back(check_modality_loss(kind));
  out.push_back(check_attention());
  out.push_back(check_captioner(false, mtm::ModalityLossKind::MSE));
  out.push_back(check_captioner(true, mtm::ModalityLossKind::MSE));
  out.push_back(check_captioner(true, mtm::ModalityLossKind::MMD));
  return out;
}

}  // namespace suites

#include "mbridge/numcore/lstm.hpp"

#include <cmath>

#include "mbridge/numcore/errors.hpp"
#include "mbridge/numcore/ops.hpp"

namespace mbridge {

namespace {

Tensor as_batch(const Tensor& t) { return t.rank() == 1 ? t.reshaped({1, t.size()}) : t; }

}  // namespace

LstmParams::LstmParams(const std::string& name, std::size_t input_dim, std::size_t hidden_dim)
    : w_ih(name + ".W_ih", {4 * hidden_dim, input_dim}),
      w_hh(name + ".W_hh", {4 * hidden_dim, hidden_dim}),
      bias(name + ".b", {4 * hidden_dim}) {}

LstmState lstm_cell(const LstmParams& params, const Tensor& x_in, const Tensor& h_in,
                    const Tensor& c_in, LstmStepCache* cache) {
  const std::size_t d = params.hidden_dim();
  const Tensor x = as_batch(x_in);
  const Tensor h_prev = as_batch(h_in);
  const Tensor c_prev = as_batch(c_in);
  const std::size_t batch = x.rows();
  if (x.cols() != params.input_dim()) {
    throw DimensionError("lstm_cell: input " + shape_to_string(x_in.shape()) + " vs W_ih " +
                         shape_to_string(params.w_ih.value.shape()));
  }
  if (h_prev.cols() != d || c_prev.cols() != d || h_prev.rows() != batch || c_prev.rows() != batch) {
    throw DimensionError("lstm_cell: state " + shape_to_string(h_in.shape()) + "/" +
                         shape_to_string(c_in.shape()) + " vs hidden size " + std::to_string(d) +
                         " and batch " + std::to_string(batch));
  }

  Tensor z = matmul_nt(x, params.w_ih.value);
  gemm_nt_accumulate(h_prev, params.w_hh.value, z);
  add_row_bias(z, params.bias.value);

  Tensor i({batch, d}), f({batch, d}), g({batch, d}), o({batch, d});
  Tensor c({batch, d}), tanh_c({batch, d}), h({batch, d});
  for (std::size_t r = 0; r < batch; ++r) {
    const auto zr = z.row(r);
    for (std::size_t j = 0; j < d; ++j) {
      const std::size_t k = r * d + j;
      i[k] = sigmoid(zr[j]);
      f[k] = sigmoid(zr[d + j]);
      g[k] = std::tanh(zr[2 * d + j]);
      o[k] = sigmoid(zr[3 * d + j]);
      c[k] = f[k] * c_prev[k] + i[k] * g[k];
      tanh_c[k] = std::tanh(c[k]);
      h[k] = o[k] * tanh_c[k];
    }
  }

  LstmState out;
  if (x_in.rank() == 1) {
    out = {h.reshaped({d}), c.reshaped({d})};
  } else {
    out = {h, c};
  }
  if (cache) {
    *cache = LstmStepCache{x,  h_prev, c_prev, std::move(i), std::move(f), std::move(g),
                           std::move(o), std::move(c), std::move(tanh_c)};
  }
  return out;
}

LstmInputGrads lstm_cell_backward(LstmParams& params, const LstmStepCache& cache,
                                  const Tensor& grad_h_in, const Tensor& grad_c_in) {
  const std::size_t d = params.hidden_dim();
  const std::size_t batch = cache.x.rows();
  const Tensor grad_h = as_batch(grad_h_in);
  const bool has_grad_c = !grad_c_in.empty();
  const Tensor grad_c = has_grad_c ? as_batch(grad_c_in) : Tensor();
  if (grad_h.rows() != batch || grad_h.cols() != d ||
      (has_grad_c && (grad_c.rows() != batch || grad_c.cols() != d))) {
    throw DimensionError("lstm_cell_backward: gradient shape " + shape_to_string(grad_h_in.shape()));
  }

  Tensor dz({batch, 4 * d});
  Tensor dc_prev({batch, d});
  for (std::size_t r = 0; r < batch; ++r) {
    auto dzr = dz.row(r);
    for (std::size_t j = 0; j < d; ++j) {
      const std::size_t k = r * d + j;
      const double i = cache.i[k], f = cache.f[k], g = cache.g[k], o = cache.o[k];
      const double tc = cache.tanh_c[k];
      const double dh = grad_h[k];
      const double dc = (has_grad_c ? grad_c[k] : 0.0) + dh * o * (1.0 - tc * tc);
      dzr[j] = dc * g * i * (1.0 - i);
      dzr[d + j] = dc * cache.c_prev[k] * f * (1.0 - f);
      dzr[2 * d + j] = dc * i * (1.0 - g * g);
      dzr[3 * d + j] = dh * tc * o * (1.0 - o);
      dc_prev[k] = dc * f;
    }
  }

  gemm_tn_accumulate(dz, cache.x, params.w_ih.grad);
  gemm_tn_accumulate(dz, cache.h_prev, params.w_hh.grad);
  add_row_bias_backward(dz, params.bias.grad);

  LstmInputGrads out{matmul(dz, params.w_ih.value), matmul(dz, params.w_hh.value), std::move(dc_prev)};
  if (grad_h_in.rank() == 1) {
    out.x = out.x.reshaped({params.input_dim()});
    out.h_prev = out.h_prev.reshaped({d});
    out.c_prev = out.c_prev.reshaped({d});
  }
  return out;
}

}  // namespace mbridge

namespace mbridge {

StackState StackState::zeros(std::size_t layers, std::size_t batch, std::size_t hidden) {
  StackState s;
  s.h.assign(layers, Tensor({batch, hidden}));
  s.c.assign(layers, Tensor({batch, hidden}));
  return s;
}

Tensor lstm_stack_step(const std::vector<LstmParams>& layers, const Tensor& x, StackState& state,
                       std::vector<LstmStepCache>* caches) {
  if (caches) caches->resize(layers.size());
  Tensor input = x;
  for (std::size_t l = 0; l < layers.size(); ++l) {
    auto next = lstm_cell(layers[l], input, state.h[l], state.c[l], caches ? &(*caches)[l] : nullptr);
    state.h[l] = next.h;
    state.c[l] = std::move(next.c);
    input = std::move(next.h);
  }
  return input;
}

Tensor lstm_stack_step_backward(std::vector<LstmParams>& layers,
                                const std::vector<LstmStepCache>& caches, const Tensor& grad_top_h,
                                StackState& grad_state) {
  Tensor grad_from_above = grad_top_h;
  for (std::size_t l = layers.size(); l-- > 0;) {
    Tensor dh = grad_state.h[l];
    dh += grad_from_above;
    auto grads = lstm_cell_backward(layers[l], caches[l], dh, grad_state.c[l]);
    grad_state.h[l] = std::move(grads.h_prev);
    grad_state.c[l] = std::move(grads.c_prev);
    grad_from_above = std::move(grads.x);
  }
  return grad_from_above;
}

}  // namespace mbridge

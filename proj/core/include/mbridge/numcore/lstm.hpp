#pragma once

#include <string>
#include <vector>

#include "mbridge/numcore/parameter.hpp"

namespace mbridge {

/// Weights of one LSTM layer.
///
/// Gate blocks are stacked in the order (input, forget, cell, output) along
/// the leading 4·d axis:
///   z = x·W_ihᵀ + h_prev·W_hhᵀ + b          z is [B×4d]
///   i = σ(z[0:d])  f = σ(z[d:2d])  g = tanh(z[2d:3d])  o = σ(z[3d:4d])
///   c = f⊙c_prev + i⊙g,  h = o⊙tanh(c)
struct LstmParams {
  Parameter w_ih;  // [4d×d_in]
  Parameter w_hh;  // [4d×d]
  Parameter bias;  // [4d]

  LstmParams() = default;
  LstmParams(const std::string& name, std::size_t input_dim, std::size_t hidden_dim);

  std::size_t input_dim() const { return w_ih.value.cols(); }
  std::size_t hidden_dim() const { return w_hh.value.cols(); }

  ParameterList parameters() { return {&w_ih, &w_hh, &bias}; }
};

/// Activations saved by the forward pass for the backward pass.
struct LstmStepCache {
  Tensor x, h_prev, c_prev;
  Tensor i, f, g, o;
  Tensor c, tanh_c;
};

struct LstmState {
  Tensor h;
  Tensor c;
};

struct LstmInputGrads {
  Tensor x;
  Tensor h_prev;
  Tensor c_prev;
};

/// One cell step over a batch. x is [B×d_in]; h_prev and c_prev are [B×d].
/// Rank-1 inputs are accepted and treated as B = 1.
LstmState lstm_cell(const LstmParams& params, const Tensor& x, const Tensor& h_prev,
                    const Tensor& c_prev, LstmStepCache* cache = nullptr);

/// Backward through one cell step. grad_h and grad_c are dL/dh and the
/// gradient reaching c from later steps (may be empty for zero). Parameter
/// gradients accumulate into `params`.
LstmInputGrads lstm_cell_backward(LstmParams& params, const LstmStepCache& cache,
                                  const Tensor& grad_h, const Tensor& grad_c);

}  // namespace mbridge

namespace mbridge {

/// Per-layer hidden and cell states of a stacked LSTM, layer 0 at the bottom.
struct StackState {
  std::vector<Tensor> h;
  std::vector<Tensor> c;

  static StackState zeros(std::size_t layers, std::size_t batch, std::size_t hidden);
};

/// Runs one time step through every layer; returns the top-layer hidden state.
Tensor lstm_stack_step(const std::vector<LstmParams>& layers, const Tensor& x, StackState& state,
                       std::vector<LstmStepCache>* caches = nullptr);

/// Backward through one stacked step. `grad_state` holds the gradients
/// reaching this step's output states from later steps and is replaced by
/// the gradients with respect to the step's input states. Returns dL/dx.
Tensor lstm_stack_step_backward(std::vector<LstmParams>& layers,
                                const std::vector<LstmStepCache>& caches, const Tensor& grad_top_h,
                                StackState& grad_state);

}  // namespace mbridge

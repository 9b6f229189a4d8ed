#include "mbridge/numcore/adam.hpp"

#include <cmath>

#include "mbridge/numcore/errors.hpp"

namespace mbridge {

void adam_step(Parameter& p, AdamState& s) {
  if (s.m.shape() != p.value.shape()) s.m = Tensor(p.value.shape());
  if (s.v.shape() != p.value.shape()) s.v = Tensor(p.value.shape());
  if (!p.grad.all_finite()) throw TrainingError("non-finite gradient in parameter " + p.name);

  s.step += 1;
  const double t = static_cast<double>(s.step);
  const double correction1 = 1.0 - std::pow(s.beta1, t);
  const double correction2 = 1.0 - std::pow(s.beta2, t);
  auto value = p.value.data();
  const auto grad = p.grad.data();
  auto m = s.m.data();
  auto v = s.v.data();
  for (std::size_t i = 0; i < value.size(); ++i) {
    m[i] = s.beta1 * m[i] + (1.0 - s.beta1) * grad[i];
    v[i] = s.beta2 * v[i] + (1.0 - s.beta2) * grad[i] * grad[i];
    const double m_hat = m[i] / correction1;
    const double v_hat = v[i] / correction2;
    value[i] -= s.lr * m_hat / (std::sqrt(v_hat) + s.eps);
  }
}

Adam::Adam(const ParameterList& params, double lr, double beta1, double beta2, double eps) : lr_(lr) {
  for (auto* p : params) {
    AdamState state;
    state.m = Tensor(p->value.shape());
    state.v = Tensor(p->value.shape());
    state.lr = lr;
    state.beta1 = beta1;
    state.beta2 = beta2;
    state.eps = eps;
    if (!states_.emplace(p->name, std::move(state)).second) {
      throw InputError("duplicate parameter name: " + p->name);
    }
  }
}

void Adam::step(const ParameterList& params) {
  for (auto* p : params) {
    auto it = states_.find(p->name);
    if (it == states_.end()) throw InputError("Adam has no state for parameter " + p->name);
    adam_step(*p, it->second);
  }
}

void Adam::set_lr(double lr) {
  lr_ = lr;
  for (auto& [name, state] : states_) state.lr = lr;
}

}  // namespace mbridge

#include "esrgan/optim.hpp"

#include <cmath>

#include "esrgan/errors.hpp"

namespace esrgan {

AdamState make_adam_state(const std::vector<Parameter>& params, AdamHyper hyper) {
  AdamState state;
  state.hyper = hyper;
  for (const auto& p : params) {
    state.m.emplace_back(p.tensor.numel(), 0.0);
    state.v.emplace_back(p.tensor.numel(), 0.0);
  }
  return state;
}

void adam_step(const std::vector<Parameter>& params, AdamState& state, double lr) {
  if (state.m.size() != params.size() || state.v.size() != params.size()) {
    throw DimensionError("adam_step: optimizer state tracks " + std::to_string(state.m.size()) +
                         " parameters, model has " + std::to_string(params.size()));
  }
  const auto& h = state.hyper;
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double correction1 = 1.0 - std::pow(h.beta1, t);
  const double correction2 = 1.0 - std::pow(h.beta2, t);
  for (std::size_t k = 0; k < params.size(); ++k) {
    Tensor param = params[k].tensor;
    auto values = param.mutable_data();
    const auto grad = param.grad();
    auto& m = state.m[k];
    auto& v = state.v[k];
    if (m.size() != values.size() || v.size() != values.size()) {
      throw DimensionError("adam_step: moment size mismatch for " + params[k].name);
    }
    const bool has_grad = !grad.empty();
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double g = has_grad ? grad[i] : 0.0;
      m[i] = h.beta1 * m[i] + (1.0 - h.beta1) * g;
      v[i] = h.beta2 * v[i] + (1.0 - h.beta2) * g * g;
      const double m_hat = m[i] / correction1;
      const double v_hat = v[i] / correction2;
      values[i] -= lr * m_hat / (std::sqrt(v_hat) + h.eps);
    }
  }
}

void zero_grad(const std::vector<Parameter>& params) {
  for (const auto& p : params) {
    Tensor t = p.tensor;
    t.zero_grad();
  }
}

void set_requires_grad(const std::vector<Parameter>& params, bool value) {
  for (const auto& p : params) {
    Tensor t = p.tensor;
    t.set_requires_grad(value);
  }
}

}  // namespace esrgan

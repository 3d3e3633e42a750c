#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "esrgan/tensor.hpp"

namespace esrgan {

/// A trainable tensor with a model-unique hierarchical name
/// ("blocks.0.inner.2.conv.1.weight").
struct Parameter {
  std::string name;
  Tensor tensor;
};

struct AdamHyper {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  bool operator==(const AdamHyper&) const = default;
};

/// First/second moment estimates for one parameter list, in list order.
struct AdamState {
  AdamHyper hyper;
  std::int64_t step = 0;
  std::vector<std::vector<double>> m;
  std::vector<std::vector<double>> v;
};

AdamState make_adam_state(const std::vector<Parameter>& params, AdamHyper hyper = {});

/// One bias-corrected Adam update. Parameters without a populated gradient
/// are treated as having zero gradient. Gradients are left in place.
void adam_step(const std::vector<Parameter>& params, AdamState& state, double lr);

void zero_grad(const std::vector<Parameter>& params);
void set_requires_grad(const std::vector<Parameter>& params, bool value);

}  // namespace esrgan

#pragma once

#include <cstdint>
#include <vector>

#include "esrgan/models.hpp"
#include "esrgan/tensor.hpp"

namespace esrgan {

struct LossWeights {
  double perceptual = 1.0;
  double adversarial = 5e-3;  // lambda
  double pixel = 1e-2;        // eta

  void validate() const;
  bool operator==(const LossWeights&) const = default;
};

struct FeatureExtractorSpec {
  /// Channel widths of the conv stack, starting with the 3 input channels.
  std::vector<int> channels{3, 16, 32, 32};
  /// Number of convolutions applied; the tap is the last of them, taken
  /// before its activation. 1 <= tap_depth <= channels.size() - 1.
  int tap_depth = 3;
  std::uint64_t seed = 7;

  void validate() const;
  bool operator==(const FeatureExtractorSpec&) const = default;
};

/// Frozen convolutional feature network; stride-1 3x3 convs separated by
/// leaky-relu, returning the pre-activation output of the tap layer.
/// Deterministic, and its weights never receive gradients.
class FeatureExtractor {
 public:
  explicit FeatureExtractor(const FeatureExtractorSpec& spec);
  /// Custom stack, e.g. a single identity conv. Weights are frozen on entry.
  explicit FeatureExtractor(std::vector<ConvLayer> layers);

  Tensor forward(const Tensor& image) const;
  const std::vector<ConvLayer>& layers() const { return layers_; }

 private:
  std::vector<ConvLayer> layers_;
};

/// Mean absolute difference over all elements.
Tensor pixel_l1(const Tensor& sr, const Tensor& hr);

/// Mean absolute difference of pre-activation features. Gradient reaches sr;
/// the hr branch is evaluated without a graph.
Tensor perceptual_loss(const Tensor& sr, const Tensor& hr, const FeatureExtractor& f);

/// Relativistic-average discriminator loss:
///   mean softplus(-(r - mean f)) + mean softplus(f - mean r)
/// which equals -E[log s(r - mean f)] - E[log(1 - s(f - mean r))], evaluated
/// in logit space. Inputs hold one logit per sample.
Tensor ragan_d_loss(const Tensor& real_logits, const Tensor& fake_logits);
/// Generator side: ragan_d_loss with the roles swapped.
Tensor ragan_g_loss(const Tensor& real_logits, const Tensor& fake_logits);

struct GeneratorLossTerms {
  Tensor total;
  Tensor perceptual;
  Tensor adversarial;
  Tensor pixel;
};

/// perceptual_weight * perceptual + lambda * ragan_g + eta * pixel_l1.
GeneratorLossTerms total_generator_loss(const Tensor& sr, const Tensor& hr, const Tensor& d_real_logits,
                                        const Tensor& d_fake_logits, const FeatureExtractor& f,
                                        const LossWeights& w);

/// The weighted sum on already-computed component values.
Tensor combine_generator_loss(const Tensor& perceptual, const Tensor& adversarial, const Tensor& pixel,
                              const LossWeights& w);

/// Numerically stable log(1 + exp(z)).
double softplus(double z);

}  // namespace esrgan

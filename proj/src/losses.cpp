#include "esrgan/losses.hpp"

#include <cmath>

#include "esrgan/errors.hpp"
#include "esrgan/ops.hpp"

namespace esrgan {

void LossWeights::validate() const {
  if (perceptual < 0.0 || adversarial < 0.0 || pixel < 0.0) throw ConfigError("loss weights must be >= 0");
}

void FeatureExtractorSpec::validate() const {
  if (channels.size() < 2 || channels.front() != 3) {
    throw ConfigError("feature_extractor.channels must start with 3 and list at least one layer");
  }
  for (int c : channels) {
    if (c < 1) throw ConfigError("feature_extractor.channels must be positive");
  }
  if (tap_depth < 1 || static_cast<std::size_t>(tap_depth) >= channels.size()) {
    throw ConfigError("feature_extractor.tap_depth must be in [1, " + std::to_string(channels.size() - 1) + "]");
  }
}

FeatureExtractor::FeatureExtractor(const FeatureExtractorSpec& spec) {
  spec.validate();
  RngState rng(spec.seed);
  for (int i = 0; i < spec.tap_depth; ++i) {
    layers_.push_back(make_conv(spec.channels[i], spec.channels[i + 1], 3, 1, rng, 1.0, false));
  }
}

FeatureExtractor::FeatureExtractor(std::vector<ConvLayer> layers) : layers_(std::move(layers)) {
  if (layers_.empty()) throw ConfigError("feature extractor needs at least one layer");
  for (auto& l : layers_) {
    l.weight.set_requires_grad(false);
    l.bias.set_requires_grad(false);
  }
}

Tensor FeatureExtractor::forward(const Tensor& image) const {
  Tensor x = image;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    x = layers_[i].forward(x);
    if (i + 1 < layers_.size()) x = ops::leaky_relu(x, kLeakySlope);
  }
  return x;
}

Tensor pixel_l1(const Tensor& sr, const Tensor& hr) { return ops::l1_distance(sr, hr); }

Tensor perceptual_loss(const Tensor& sr, const Tensor& hr, const FeatureExtractor& f) {
  if (sr.shape() != hr.shape()) {
    throw DimensionError("perceptual_loss: shape mismatch " + sr.shape().str() + " vs " + hr.shape().str());
  }
  Tensor hr_features;
  {
    NoGradGuard no_grad;
    hr_features = f.forward(hr);
  }
  return ops::l1_distance(f.forward(sr), hr_features);
}

double softplus(double z) { return std::max(z, 0.0) + std::log1p(std::exp(-std::abs(z))); }

namespace {

double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

/// mean softplus(-(a - mean b)) + mean softplus(b - mean a)
Tensor relativistic_loss(const Tensor& a, const Tensor& b, const char* op) {
  if (!a.defined() || !b.defined()) throw DimensionError(std::string(op) + ": undefined logits");
  const std::size_t n = a.numel();
  if (n == 0 || b.numel() == 0) throw DimensionError(std::string(op) + ": empty batch");
  if (b.numel() != n) {
    throw DimensionError(std::string(op) + ": batch sizes differ (" + std::to_string(n) + " vs " +
                         std::to_string(b.numel()) + ")");
  }
  const auto da = a.data();
  const auto db = b.data();
  double mean_a = 0.0;
  double mean_b = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    mean_a += da[i];
    mean_b += db[i];
  }
  mean_a /= static_cast<double>(n);
  mean_b /= static_cast<double>(n);

  double first = 0.0;
  double second = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    first += softplus(-(da[i] - mean_b));
    second += softplus(db[i] - mean_a);
  }
  const double value = (first + second) / static_cast<double>(n);

  return Tensor::make_result(
      Shape{1, 1, 1, 1}, {value}, {a, b},
      [a, b, mean_a, mean_b, n](std::span<const double> up, std::span<std::vector<double>*> g) {
        const auto da = a.data();
        const auto db = b.data();
        const double inv_n = 1.0 / static_cast<double>(n);
        // d/du softplus(-u) = -s(-u); d/dv softplus(v) = s(v).
        std::vector<double> p(n);
        std::vector<double> q(n);
        double sum_p = 0.0;
        double sum_q = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
          p[i] = sigmoid(-(da[i] - mean_b));
          q[i] = sigmoid(db[i] - mean_a);
          sum_p += p[i];
          sum_q += q[i];
        }
        const double scale = up[0] * inv_n;
        for (std::size_t i = 0; i < n; ++i) {
          if (g[0]) (*g[0])[i] += scale * (-p[i] - sum_q * inv_n);
          if (g[1]) (*g[1])[i] += scale * (q[i] + sum_p * inv_n);
        }
      });
}

}  // namespace

Tensor ragan_d_loss(const Tensor& real_logits, const Tensor& fake_logits) {
  return relativistic_loss(real_logits, fake_logits, "ragan_d_loss");
}

Tensor ragan_g_loss(const Tensor& real_logits, const Tensor& fake_logits) {
  return relativistic_loss(fake_logits, real_logits, "ragan_g_loss");
}

Tensor combine_generator_loss(const Tensor& perceptual, const Tensor& adversarial, const Tensor& pixel,
                              const LossWeights& w) {
  return ops::add(ops::add(ops::scale(perceptual, w.perceptual), ops::scale(adversarial, w.adversarial)),
                  ops::scale(pixel, w.pixel));
}

GeneratorLossTerms total_generator_loss(const Tensor& sr, const Tensor& hr, const Tensor& d_real_logits,
                                        const Tensor& d_fake_logits, const FeatureExtractor& f,
                                        const LossWeights& w) {
  GeneratorLossTerms terms;
  terms.perceptual = perceptual_loss(sr, hr, f);
  terms.adversarial = ragan_g_loss(d_real_logits, d_fake_logits);
  terms.pixel = pixel_l1(sr, hr);
  terms.total = combine_generator_loss(terms.perceptual, terms.adversarial, terms.pixel, w);
  return terms;
}

}  // namespace esrgan

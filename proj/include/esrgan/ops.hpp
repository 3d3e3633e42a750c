#pragma once

#include <vector>

#include "esrgan/tensor.hpp"

// Differentiable primitives. Every op validates shapes up front and throws
// DimensionError with the offending extents.
namespace esrgan::ops {

/// 2-D cross-correlation. weight is (co, ci, kh, kw) with odd kernel sides;
/// bias is (1, co, 1, 1) or undefined.
Tensor conv2d(const Tensor& input, const Tensor& weight, const Tensor& bias, int stride = 1, int padding = 0);

Tensor leaky_relu(const Tensor& x, double slope);
Tensor upsample_nearest(const Tensor& x, int factor);

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& x, double factor);
Tensor concat_channels(const std::vector<Tensor>& parts);
Tensor reshape(const Tensor& x, Shape shape);

/// Mean over all elements, shape (1,1,1,1).
Tensor mean(const Tensor& x);
Tensor sum(const Tensor& x);
/// Mean absolute difference, shape (1,1,1,1).
Tensor l1_distance(const Tensor& a, const Tensor& b);

/// x + scales[c] * noise[n, 0, h, w]. scales is (1, c, 1, 1), noise is
/// (n, 1, h, w); the noise map is shared by every channel of a sample.
Tensor add_channel_scaled(const Tensor& x, const Tensor& scales, const Tensor& noise);

/// Per-channel batch normalisation using batch statistics (biased variance).
/// gamma and beta are (1, c, 1, 1).
Tensor batch_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps = 1e-5);

}  // namespace esrgan::ops

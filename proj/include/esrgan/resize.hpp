#pragma once

#include <cstddef>
#include <vector>

#include "esrgan/image.hpp"

namespace esrgan {

inline constexpr double kBicubicA = -0.5;

/// Keys cubic convolution kernel with a = -0.5, support (-2, 2).
double cubic_kernel(double x);

/// Source taps (already clamped to the input range) and normalised weights
/// for one output coordinate.
struct ResampleTaps {
  std::vector<std::size_t> index;
  std::vector<double> weight;
};

/// 1-D resampling taps from `in_len` to `out_len` samples with half-pixel
/// centres. When `antialias` is set and the axis shrinks, the kernel is
/// stretched by the inverse scale.
std::vector<ResampleTaps> resample_taps(std::size_t in_len, std::size_t out_len, bool antialias);

/// Separable bicubic resampling (rows first, then columns).
ImageRGB bicubic_resize(const ImageRGB& img, std::size_t out_h, std::size_t out_w, bool antialias = true);

/// Same as bicubic_resize on a single plane stored row-major.
std::vector<double> bicubic_resize_plane(const std::vector<double>& plane, std::size_t h, std::size_t w,
                                         std::size_t out_h, std::size_t out_w, bool antialias = true);

/// x4 bicubic degradation with antialiasing; dimensions must divide by 4.
ImageRGB degrade_x4(const ImageRGB& hr);

}  // namespace esrgan

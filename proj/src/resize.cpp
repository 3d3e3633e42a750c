#include "esrgan/resize.hpp"

#include <algorithm>
#include <cmath>

#include "esrgan/errors.hpp"

namespace esrgan {

double cubic_kernel(double x) {
  const double a = kBicubicA;
  const double ax = std::abs(x);
  const double ax2 = ax * ax;
  const double ax3 = ax2 * ax;
  if (ax <= 1.0) return (a + 2.0) * ax3 - (a + 3.0) * ax2 + 1.0;
  if (ax < 2.0) return a * ax3 - 5.0 * a * ax2 + 8.0 * a * ax - 4.0 * a;
  return 0.0;
}

std::vector<ResampleTaps> resample_taps(std::size_t in_len, std::size_t out_len, bool antialias) {
  if (in_len == 0 || out_len == 0) throw DimensionError("resample: lengths must be >= 1");
  const double scale = static_cast<double>(out_len) / static_cast<double>(in_len);
  const bool stretch = antialias && scale < 1.0;
  const double kernel_scale = stretch ? scale : 1.0;
  const double support = 4.0 / kernel_scale;
  const long last = static_cast<long>(in_len) - 1;

  std::vector<ResampleTaps> taps(out_len);
  for (std::size_t j = 0; j < out_len; ++j) {
    const double center = (static_cast<double>(j) + 0.5) / scale - 0.5;
    const long first = static_cast<long>(std::floor(center - support / 2.0));
    const long count = static_cast<long>(std::ceil(support)) + 2;
    auto& t = taps[j];
    double total = 0.0;
    for (long k = 0; k < count; ++k) {
      const long src = first + k;
      const double wgt = kernel_scale * cubic_kernel(kernel_scale * (center - static_cast<double>(src)));
      if (wgt == 0.0) continue;
      t.index.push_back(static_cast<std::size_t>(std::clamp(src, 0L, last)));
      t.weight.push_back(wgt);
      total += wgt;
    }
    for (double& wgt : t.weight) wgt /= total;
  }
  return taps;
}

namespace {

// Resamples `rows` x `in_len` row-major data along its contiguous axis.
void resample_rows(const double* src, std::size_t rows, std::size_t in_len, const std::vector<ResampleTaps>& taps,
                   double* dst) {
  const std::size_t out_len = taps.size();
  for (std::size_t r = 0; r < rows; ++r) {
    const double* in = src + r * in_len;
    double* out = dst + r * out_len;
    for (std::size_t j = 0; j < out_len; ++j) {
      double acc = 0.0;
      for (std::size_t k = 0; k < taps[j].index.size(); ++k) acc += taps[j].weight[k] * in[taps[j].index[k]];
      out[j] = acc;
    }
  }
}

// Resamples along the strided (vertical) axis.
void resample_cols(const double* src, std::size_t w, const std::vector<ResampleTaps>& taps,
                   double* dst) {
  for (std::size_t i = 0; i < taps.size(); ++i) {
    double* out = dst + i * w;
    std::fill(out, out + w, 0.0);
    for (std::size_t k = 0; k < taps[i].index.size(); ++k) {
      const double wgt = taps[i].weight[k];
      const double* in = src + taps[i].index[k] * w;
      for (std::size_t x = 0; x < w; ++x) out[x] += wgt * in[x];
    }
  }
}

}  // namespace

std::vector<double> bicubic_resize_plane(const std::vector<double>& plane, std::size_t h, std::size_t w,
                                         std::size_t out_h, std::size_t out_w, bool antialias) {
  if (plane.size() != h * w) throw DimensionError("bicubic_resize_plane: plane size does not match dimensions");
  if (out_h == 0 || out_w == 0) throw DimensionError("bicubic_resize: output dimensions must be >= 1");
  const auto row_taps = resample_taps(h, out_h, antialias);
  const auto col_taps = resample_taps(w, out_w, antialias);
  std::vector<double> tmp(out_h * w);
  resample_cols(plane.data(), w, row_taps, tmp.data());
  std::vector<double> out(out_h * out_w);
  resample_rows(tmp.data(), out_h, w, col_taps, out.data());
  return out;
}

ImageRGB bicubic_resize(const ImageRGB& img, std::size_t out_h, std::size_t out_w, bool antialias) {
  if (out_h == 0 || out_w == 0) throw DimensionError("bicubic_resize: output dimensions must be >= 1");
  if (img.height == 0 || img.width == 0) throw DimensionError("bicubic_resize: empty input");
  const auto row_taps = resample_taps(img.height, out_h, antialias);
  const auto col_taps = resample_taps(img.width, out_w, antialias);
  ImageRGB out(out_h, out_w);
  std::vector<double> tmp(out_h * img.width);
  for (std::size_t c = 0; c < 3; ++c) {
    resample_cols(img.pixels.data() + c * img.height * img.width, img.width, row_taps, tmp.data());
    resample_rows(tmp.data(), out_h, img.width, col_taps, out.pixels.data() + c * out_h * out_w);
  }
  return out;
}

ImageRGB degrade_x4(const ImageRGB& hr) {
  if (hr.height % 4 != 0 || hr.width % 4 != 0) {
    throw DimensionError("degrade_x4: dimensions " + std::to_string(hr.height) + "x" + std::to_string(hr.width) +
                         " are not divisible by 4");
  }
  return bicubic_resize(hr, hr.height / 4, hr.width / 4, true);
}

}  // namespace esrgan

#include "esrgan/metrics.hpp"

#include <cmath>
#include <limits>

#include "esrgan/errors.hpp"

namespace esrgan {

Plane rgb_to_y(const ImageRGB& img) {
  Plane y(img.height, img.width);
  for (std::size_t r = 0; r < img.height; ++r) {
    for (std::size_t c = 0; c < img.width; ++c) {
      const double v = 65.481 * img.at(0, r, c) + 128.553 * img.at(1, r, c) + 24.966 * img.at(2, r, c);
      y.at(r, c) = (16.0 + v) / 255.0;
    }
  }
  return y;
}

double psnr(const Plane& a, const Plane& b, int crop_border) {
  if (a.height != b.height || a.width != b.width) {
    throw DimensionError("psnr: size mismatch " + std::to_string(a.height) + "x" + std::to_string(a.width) + " vs " +
                         std::to_string(b.height) + "x" + std::to_string(b.width));
  }
  if (crop_border < 0) throw DimensionError("psnr: crop_border must be >= 0");
  const auto border = static_cast<std::size_t>(crop_border);
  if (a.height <= 2 * border || a.width <= 2 * border) {
    throw DimensionError("psnr: image too small for crop_border " + std::to_string(crop_border));
  }
  double sse = 0.0;
  for (std::size_t y = border; y < a.height - border; ++y) {
    for (std::size_t x = border; x < a.width - border; ++x) {
      const double d = a.at(y, x) - b.at(y, x);
      sse += d * d;
    }
  }
  const double count = static_cast<double>((a.height - 2 * border) * (a.width - 2 * border));
  const double mse = sse / count;
  if (mse == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(1.0 / mse);
}

double psnr_y(const ImageRGB& sr, const ImageRGB& hr, int crop_border) {
  return psnr(rgb_to_y(sr), rgb_to_y(hr), crop_border);
}

double perceptual_index(double ma, double niqe) { return ((10.0 - ma) + niqe) / 2.0; }

void finalize_report(QualityReport& r) {
  if (r.ma && r.niqe) {
    r.perceptual_index = perceptual_index(*r.ma, *r.niqe);
  } else {
    r.perceptual_index.reset();
  }
}

}  // namespace esrgan

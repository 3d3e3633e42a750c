#pragma once

#include <optional>
#include <string>
#include <vector>

#include "esrgan/image.hpp"

namespace esrgan {

/// Single-channel row-major plane.
struct Plane {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<double> values;

  Plane() = default;
  Plane(std::size_t h, std::size_t w, double fill = 0.0) : height(h), width(w), values(h * w, fill) {}
  double& at(std::size_t y, std::size_t x) { return values[y * width + x]; }
  double at(std::size_t y, std::size_t x) const { return values[y * width + x]; }
};

/// BT.601 studio-swing luma on [0, 1] inputs:
/// Y = 16/255 + (65.481 R + 128.553 G + 24.966 B) / 255.
Plane rgb_to_y(const ImageRGB& img);

/// PSNR in dB of the Y planes with `crop_border` pixels removed on every
/// side, MAX = 1. Identical planes give +infinity.
double psnr_y(const ImageRGB& sr, const ImageRGB& hr, int crop_border = 4);
double psnr(const Plane& a, const Plane& b, int crop_border = 0);

/// ((10 - ma) + niqe) / 2; lower is better.
double perceptual_index(double ma, double niqe);

struct QualityReport {
  std::string filename;
  double psnr_y = 0.0;
  std::optional<double> niqe;
  std::optional<double> ma;
  std::optional<double> perceptual_index;
};

/// Fills perceptual_index from ma and niqe when both are present.
void finalize_report(QualityReport& r);

}  // namespace esrgan

#pragma once

#include <filesystem>
#include <vector>

#include "esrgan/tensor.hpp"

namespace esrgan {

/// Channel-major RGB image with values in [0, 1]: pixels[(c * height + y) * width + x].
struct ImageRGB {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<double> pixels;

  ImageRGB() = default;
  ImageRGB(std::size_t h, std::size_t w, double fill = 0.0) : height(h), width(w), pixels(3 * h * w, fill) {}

  double& at(std::size_t c, std::size_t y, std::size_t x) { return pixels[(c * height + y) * width + x]; }
  double at(std::size_t c, std::size_t y, std::size_t x) const { return pixels[(c * height + y) * width + x]; }

  bool operator==(const ImageRGB&) const = default;
};

/// Reads an 8- or 16-bit PNG (gray, gray+alpha, RGB or RGBA; alpha is
/// dropped) into [0, 1]. Throws DataError naming the path on failure.
ImageRGB load_image(const std::filesystem::path& path);

/// Clamps to [0, 1] and quantises round-half-up to 8-bit RGB.
void save_image(const ImageRGB& img, const std::filesystem::path& path);

std::uint8_t quantize_8bit(double v);

/// Stacks images of identical size into an (n, 3, h, w) tensor.
Tensor images_to_tensor(const std::vector<ImageRGB>& images);
ImageRGB tensor_to_image(const Tensor& t, std::size_t index = 0);

ImageRGB crop(const ImageRGB& img, std::size_t top, std::size_t left, std::size_t h, std::size_t w);

}  // namespace esrgan

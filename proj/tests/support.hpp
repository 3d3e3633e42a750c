#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "esrgan/image.hpp"
#include "esrgan/rng.hpp"
#include "esrgan/tensor.hpp"

namespace esrgan::testing {

/// Fresh directory removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag = "t");
  ~TempDir();
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

/// Piecewise-smooth texture with a roughly 1/f spectrum and a few soft edges,
/// values inside [0.05, 0.95]. Deterministic in `seed`.
ImageRGB synthetic_image(std::size_t h, std::size_t w, std::uint64_t seed);

/// Uniform values in [lo, hi).
Tensor random_tensor(Shape shape, RngState& rng, double lo = -1.0, double hi = 1.0, bool requires_grad = false);

/// Writes `count` synthetic images to `<root>/HR/img_XX.png`.
void write_dataset(const std::filesystem::path& root, int count, std::size_t size, std::uint64_t seed);

/// Max-norm relative error between analytic and central-difference gradients
/// of `loss(inputs)` with respect to every input:
///   max|analytic - numeric| / max(max|analytic|, max|numeric|, 1e-12).
double gradient_check(const std::function<Tensor(const std::vector<Tensor>&)>& loss, std::vector<Tensor> inputs,
                      double h = 1e-5);

/// Direct quadruple-loop convolution with zero padding; bias may be undefined.
Tensor naive_conv2d(const Tensor& x, const Tensor& w, const Tensor& b, int stride, int pad);

double max_abs_diff(std::span<const double> a, std::span<const double> b);

/// Resampling operator as an explicit out x in matrix, built from the kernel
/// formula with every source position summed (clamped duplicates accumulate).
Eigen::MatrixXd dense_resample_matrix(std::size_t in, std::size_t out, bool antialias);

}  // namespace esrgan::testing

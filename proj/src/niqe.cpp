#include "esrgan/niqe.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <optional>
#include <stdexcept>

#include "esrgan/binary_io.hpp"
#include "esrgan/errors.hpp"
#include "esrgan/resize.hpp"

namespace esrgan::niqe {

namespace {

constexpr std::string_view kModelMagic = "NIQE";
constexpr std::uint32_t kModelVersion = 1;

std::array<double, kWindowSize> gaussian_window() {
  std::array<double, kWindowSize> g{};
  double total = 0.0;
  const int half = kWindowSize / 2;
  for (int i = 0; i < kWindowSize; ++i) {
    const double d = i - half;
    g[i] = std::exp(-d * d / (2.0 * kWindowSigma * kWindowSigma));
    total += g[i];
  }
  for (double& v : g) v /= total;
  return g;
}

// Separable Gaussian filtering with replicated borders.
Plane blur(const Plane& in) {
  static const auto g = gaussian_window();
  const long half = kWindowSize / 2;
  const long h = static_cast<long>(in.height);
  const long w = static_cast<long>(in.width);
  Plane tmp(in.height, in.width);
  for (long y = 0; y < h; ++y) {
    for (long x = 0; x < w; ++x) {
      double acc = 0.0;
      for (long k = -half; k <= half; ++k) acc += g[k + half] * in.at(y, std::clamp(x + k, 0L, w - 1));
      tmp.at(y, x) = acc;
    }
  }
  Plane out(in.height, in.width);
  for (long y = 0; y < h; ++y) {
    for (long x = 0; x < w; ++x) {
      double acc = 0.0;
      for (long k = -half; k <= half; ++k) acc += g[k + half] * tmp.at(std::clamp(y + k, 0L, h - 1), x);
      out.at(y, x) = acc;
    }
  }
  return out;
}

// r(alpha) = G(2/a)^2 / (G(1/a) G(3/a)) on the search grid.
struct GammaTable {
  std::vector<double> alpha;
  std::vector<double> ratio;
  GammaTable() {
    for (int i = 0; i <= 9800; ++i) {
      const double a = 0.2 + 0.001 * i;
      alpha.push_back(a);
      ratio.push_back(std::exp(2.0 * std::lgamma(2.0 / a) - std::lgamma(1.0 / a) - std::lgamma(3.0 / a)));
    }
  }
};

std::optional<AggdParams> try_aggd_fit(std::span<const double> samples) {
  static const GammaTable table;
  std::size_t neg = 0;
  std::size_t pos = 0;
  double neg_sq = 0.0;
  double pos_sq = 0.0;
  double abs_sum = 0.0;
  for (double v : samples) {
    if (v < 0.0) {
      ++neg;
      neg_sq += v * v;
    } else if (v > 0.0) {
      ++pos;
      pos_sq += v * v;
    }
    abs_sum += std::abs(v);
  }
  if (neg == 0 || pos == 0) return std::nullopt;
  const double n = static_cast<double>(samples.size());
  const double left = std::sqrt(neg_sq / static_cast<double>(neg));
  const double right = std::sqrt(pos_sq / static_cast<double>(pos));
  const double gamma_hat = left / right;
  const double mean_abs = abs_sum / n;
  const double mean_sq = (neg_sq + pos_sq) / n;
  const double r_hat = mean_abs * mean_abs / mean_sq;
  const double r_hat_norm =
      r_hat * (gamma_hat * gamma_hat * gamma_hat + 1.0) * (gamma_hat + 1.0) / std::pow(gamma_hat * gamma_hat + 1.0, 2);

  std::size_t best = 0;
  double best_err = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < table.ratio.size(); ++i) {
    const double err = (table.ratio[i] - r_hat_norm) * (table.ratio[i] - r_hat_norm);
    if (err < best_err) {
      best_err = err;
      best = i;
    }
  }
  AggdParams p;
  p.alpha = table.alpha[best];
  p.left_scale = left;
  p.right_scale = right;
  p.mean = (right - left) * std::exp(std::lgamma(2.0 / p.alpha) - std::lgamma(1.0 / p.alpha));
  if (!std::isfinite(p.mean)) return std::nullopt;
  return p;
}

// 18 features of one patch at one scale; nullopt when a fit degenerates.
std::optional<std::array<double, 18>> patch_features(const Plane& coeffs, std::size_t top, std::size_t left,
                                                     std::size_t size) {
  std::vector<double> patch(size * size);
  for (std::size_t y = 0; y < size; ++y) {
    for (std::size_t x = 0; x < size; ++x) patch[y * size + x] = coeffs.at(top + y, left + x);
  }
  std::array<double, 18> f{};
  auto base = try_aggd_fit(patch);
  if (!base) return std::nullopt;
  f[0] = base->alpha;
  f[1] = (base->left_scale + base->right_scale) / 2.0;

  // Circular shifts within the patch: horizontal, vertical, main and anti diagonal.
  constexpr int kShifts[4][2] = {{0, 1}, {1, 0}, {1, 1}, {-1, 1}};
  std::vector<double> product(size * size);
  const long s = static_cast<long>(size);
  for (int k = 0; k < 4; ++k) {
    for (long y = 0; y < s; ++y) {
      for (long x = 0; x < s; ++x) {
        const long sy = ((y - kShifts[k][0]) % s + s) % s;
        const long sx = ((x - kShifts[k][1]) % s + s) % s;
        product[y * s + x] = patch[y * s + x] * patch[sy * s + sx];
      }
    }
    auto fit = try_aggd_fit(product);
    if (!fit) return std::nullopt;
    f[2 + 4 * k] = fit->alpha;
    f[3 + 4 * k] = fit->mean;
    f[4 + 4 * k] = fit->left_scale;
    f[5 + 4 * k] = fit->right_scale;
  }
  return f;
}

void validate_patch_size(int patch_size) {
  if (patch_size < 20 || patch_size % 2 != 0) {
    throw std::invalid_argument("NIQE patch size must be even and >= 20, got " + std::to_string(patch_size));
  }
}

}  // namespace

Plane mscn(const Plane& y, Plane* sigma_out) {
  if (y.height == 0 || y.width == 0) throw DimensionError("mscn: empty plane");
  const Plane mu = blur(y);
  Plane sq(y.height, y.width);
  for (std::size_t i = 0; i < y.values.size(); ++i) sq.values[i] = y.values[i] * y.values[i];
  const Plane mu_sq = blur(sq);
  Plane out(y.height, y.width);
  Plane sigma(y.height, y.width);
  for (std::size_t i = 0; i < y.values.size(); ++i) {
    sigma.values[i] = std::sqrt(std::abs(mu_sq.values[i] - mu.values[i] * mu.values[i]));
    out.values[i] = (y.values[i] - mu.values[i]) / (sigma.values[i] + kStabilizer);
  }
  if (sigma_out) *sigma_out = std::move(sigma);
  return out;
}

AggdParams aggd_fit(std::span<const double> samples) {
  if (samples.size() < 100) throw std::invalid_argument("aggd_fit: need at least 100 samples");
  auto p = try_aggd_fit(samples);
  if (!p) throw std::invalid_argument("aggd_fit: samples need nonzero spread on both sides of zero");
  return *p;
}

std::vector<FeatureVector> niqe_features(const Plane& y, int patch_size, double sharpness_fraction) {
  validate_patch_size(patch_size);
  const auto ps = static_cast<std::size_t>(patch_size);
  if (y.height < 2 * ps || y.width < 2 * ps) {
    throw DimensionError("NIQE needs an image of at least " + std::to_string(2 * ps) + "x" + std::to_string(2 * ps) +
                         ", got " + std::to_string(y.height) + "x" + std::to_string(y.width));
  }
  const std::size_t rows = y.height / ps;
  const std::size_t cols = y.width / ps;
  Plane full(rows * ps, cols * ps);
  for (std::size_t r = 0; r < full.height; ++r) {
    for (std::size_t c = 0; c < full.width; ++c) full.at(r, c) = y.at(r, c);
  }
  Plane half;
  half.height = full.height / 2;
  half.width = full.width / 2;
  half.values = bicubic_resize_plane(full.values, full.height, full.width, half.height, half.width, true);

  Plane sigma;
  const Plane coeffs = mscn(full, &sigma);
  const Plane coeffs_half = mscn(half);

  std::vector<double> sharpness(rows * cols, 0.0);
  for (std::size_t i = 0; i < rows; ++i) {
    for (std::size_t j = 0; j < cols; ++j) {
      double acc = 0.0;
      for (std::size_t y0 = 0; y0 < ps; ++y0) {
        for (std::size_t x0 = 0; x0 < ps; ++x0) acc += sigma.at(i * ps + y0, j * ps + x0);
      }
      sharpness[i * cols + j] = acc / static_cast<double>(ps * ps);
    }
  }
  const double threshold = sharpness_fraction * *std::max_element(sharpness.begin(), sharpness.end());

  std::vector<FeatureVector> out;
  const std::size_t hs = ps / 2;
  for (std::size_t i = 0; i < rows; ++i) {
    for (std::size_t j = 0; j < cols; ++j) {
      if (sharpness_fraction > 0.0 && !(sharpness[i * cols + j] > threshold)) continue;
      auto native = patch_features(coeffs, i * ps, j * ps, ps);
      auto coarse = patch_features(coeffs_half, i * hs, j * hs, hs);
      if (!native || !coarse) continue;
      FeatureVector f{};
      std::copy(native->begin(), native->end(), f.begin());
      std::copy(coarse->begin(), coarse->end(), f.begin() + 18);
      out.push_back(f);
    }
  }
  return out;
}

Gaussian feature_statistics(const std::vector<FeatureVector>& features) {
  const std::size_t d = kFeatureDim;
  Gaussian g;
  g.mean.assign(d, 0.0);
  g.covariance.assign(d * d, 0.0);
  if (features.empty()) throw DataError("NIQE: no usable patches");
  const double n = static_cast<double>(features.size());
  for (const auto& f : features) {
    for (std::size_t i = 0; i < d; ++i) g.mean[i] += f[i];
  }
  for (double& m : g.mean) m /= n;
  if (features.size() < 2) return g;
  for (const auto& f : features) {
    for (std::size_t i = 0; i < d; ++i) {
      const double di = f[i] - g.mean[i];
      for (std::size_t j = i; j < d; ++j) g.covariance[i * d + j] += di * (f[j] - g.mean[j]);
    }
  }
  for (std::size_t i = 0; i < d; ++i) {
    for (std::size_t j = i; j < d; ++j) {
      g.covariance[i * d + j] /= (n - 1.0);
      g.covariance[j * d + i] = g.covariance[i * d + j];
    }
  }
  return g;
}

double gaussian_distance(const Gaussian& a, const Gaussian& b) {
  const auto d = static_cast<long>(kFeatureDim);
  if (a.mean.size() != kFeatureDim || b.mean.size() != kFeatureDim || a.covariance.size() != kFeatureDim * kFeatureDim ||
      b.covariance.size() != kFeatureDim * kFeatureDim) {
    throw DimensionError("NIQE: model dimension must be 36");
  }
  using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  const Mat pooled = (Eigen::Map<const Mat>(a.covariance.data(), d, d) + Eigen::Map<const Mat>(b.covariance.data(), d, d)) / 2.0;
  const Eigen::VectorXd diff =
      Eigen::Map<const Eigen::VectorXd>(a.mean.data(), d) - Eigen::Map<const Eigen::VectorXd>(b.mean.data(), d);

  Eigen::JacobiSVD<Eigen::MatrixXd> svd(pooled, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const auto& sv = svd.singularValues();
  const double tol = static_cast<double>(d) * std::numeric_limits<double>::epsilon() * (sv.size() ? sv(0) : 0.0);
  Eigen::VectorXd inv = Eigen::VectorXd::Zero(sv.size());
  for (long i = 0; i < sv.size(); ++i) {
    if (sv(i) > tol) inv(i) = 1.0 / sv(i);
  }
  const Eigen::MatrixXd pinv = svd.matrixV() * inv.asDiagonal() * svd.matrixU().transpose();
  const double q = diff.dot(pinv * diff);
  return std::sqrt(std::max(q, 0.0));
}

NiqeModel fit_pristine_model(const std::vector<ImageRGB>& corpus, int patch_size, double sharpness_fraction) {
  if (corpus.size() < 2) throw DataError("NIQE model fitting needs at least 2 images, got " + std::to_string(corpus.size()));
  std::vector<FeatureVector> pooled;
  for (const auto& img : corpus) {
    auto f = niqe_features(rgb_to_y(img), patch_size, sharpness_fraction);
    pooled.insert(pooled.end(), f.begin(), f.end());
  }
  const Gaussian g = feature_statistics(pooled);
  NiqeModel model;
  model.patch_size = patch_size;
  model.mean = g.mean;
  model.covariance = g.covariance;
  model.sharpness_fraction = sharpness_fraction;
  return model;
}

double niqe_score(const Plane& y, const NiqeModel& model) {
  const Gaussian test = feature_statistics(niqe_features(y, model.patch_size, 0.0));
  return gaussian_distance(Gaussian{model.mean, model.covariance}, test);
}

double niqe_score(const ImageRGB& img, const NiqeModel& model) { return niqe_score(rgb_to_y(img), model); }

std::vector<std::uint8_t> encode_model(const NiqeModel& model) {
  if (model.mean.size() != kFeatureDim || model.covariance.size() != kFeatureDim * kFeatureDim) {
    throw DimensionError("NIQE model must be 36-dimensional");
  }
  io::ByteWriter w;
  w.raw({reinterpret_cast<const std::uint8_t*>(kModelMagic.data()), kModelMagic.size()});
  w.u32(kModelVersion);
  w.u32(static_cast<std::uint32_t>(model.patch_size));
  w.f64s(model.mean);
  w.f64s(model.covariance);
  w.seal();
  return w.take();
}

NiqeModel decode_model(std::span<const std::uint8_t> bytes) {
  auto payload = io::verify_sealed(bytes, "NIQE model");
  io::ByteReader r(payload, "NIQE model");
  r.expect_magic(kModelMagic);
  const std::uint32_t version = r.u32();
  if (version != kModelVersion) throw IntegrityError("NIQE model: unsupported version " + std::to_string(version));
  NiqeModel model;
  model.patch_size = static_cast<int>(r.u32());
  model.mean = r.f64s(kFeatureDim);
  model.covariance = r.f64s(kFeatureDim * kFeatureDim);
  r.expect_done();
  return model;
}

void save_model(const NiqeModel& model, const std::filesystem::path& path) {
  io::write_file_atomic(path, encode_model(model));
}

NiqeModel load_model(const std::filesystem::path& path) { return decode_model(io::read_file(path)); }

}  // namespace esrgan::niqe

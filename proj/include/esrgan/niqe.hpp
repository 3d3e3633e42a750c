#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "esrgan/image.hpp"
#include "esrgan/metrics.hpp"

// Natural Image Quality Evaluator: a multivariate Gaussian fitted to
// natural-scene statistics of pristine patches, compared against the same
// statistics of a test image.
namespace esrgan::niqe {

inline constexpr std::size_t kFeatureDim = 36;
inline constexpr int kWindowSize = 7;
inline constexpr double kWindowSigma = 7.0 / 6.0;
inline constexpr double kStabilizer = 1.0 / 255.0;
inline constexpr int kDefaultPatchSize = 96;
inline constexpr double kDefaultSharpnessFraction = 0.75;

using FeatureVector = std::array<double, kFeatureDim>;

struct NiqeModel {
  int patch_size = kDefaultPatchSize;
  std::vector<double> mean;        // kFeatureDim
  std::vector<double> covariance;  // kFeatureDim x kFeatureDim, row-major
  // Not persisted.
  std::string corpus_id;
  double sharpness_fraction = kDefaultSharpnessFraction;
};

/// Mean-subtracted contrast-normalised coefficients (I - mu) / (sigma + C)
/// with a normalised 7x7 Gaussian window (std 7/6) and replicated borders.
/// When `sigma_out` is given it receives the local deviation plane.
Plane mscn(const Plane& y, Plane* sigma_out = nullptr);

struct AggdParams {
  double alpha = 0.0;        // shape
  double left_scale = 0.0;   // std of the negative samples
  double right_scale = 0.0;  // std of the positive samples
  double mean = 0.0;         // (right - left) * G(2/alpha) / G(1/alpha)
};

/// Moment-matching asymmetric generalised Gaussian fit; alpha is searched on
/// the grid 0.2:0.001:10. Requires >= 100 samples, nonzero variance and
/// samples on both sides of zero; throws std::invalid_argument otherwise.
AggdParams aggd_fit(std::span<const double> samples);

/// Per-patch 36-dim features: 18 at native resolution (AGGD of the MSCN
/// plane plus four pairwise-product orientations) and 18 on the half-scale
/// image. Patches whose mean local deviation falls below
/// `sharpness_fraction` times the image maximum are skipped; 0 keeps all.
/// The plane must be at least 2 * patch_size on each side.
std::vector<FeatureVector> niqe_features(const Plane& y, int patch_size, double sharpness_fraction = 0.0);

/// Pools sharp-patch features over a corpus (>= 2 images) into mean and
/// sample covariance.
NiqeModel fit_pristine_model(const std::vector<ImageRGB>& corpus, int patch_size = kDefaultPatchSize,
                             double sharpness_fraction = kDefaultSharpnessFraction);

/// sqrt((mu1 - mu2)^T pinv((S1 + S2)/2) (mu1 - mu2)) against all patches of
/// the image's Y plane.
double niqe_score(const ImageRGB& img, const NiqeModel& model);
double niqe_score(const Plane& y, const NiqeModel& model);

struct Gaussian {
  std::vector<double> mean;
  std::vector<double> covariance;
};
Gaussian feature_statistics(const std::vector<FeatureVector>& features);
/// Mahalanobis-type distance with the pseudo-inverse of the pooled covariance.
double gaussian_distance(const Gaussian& a, const Gaussian& b);

std::vector<std::uint8_t> encode_model(const NiqeModel& model);
NiqeModel decode_model(std::span<const std::uint8_t> bytes);
void save_model(const NiqeModel& model, const std::filesystem::path& path);
NiqeModel load_model(const std::filesystem::path& path);

}  // namespace esrgan::niqe

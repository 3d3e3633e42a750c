#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "esrgan/image.hpp"
#include "esrgan/rng.hpp"
#include "esrgan/tensor.hpp"

namespace esrgan {

struct DatasetRecord {
  std::string stem;
  std::filesystem::path hr_path;
  std::optional<std::filesystem::path> lr_path;
};

/// Records of `<root>/HR/*.png` (and, when present, `<root>/LR/*.png` with
/// identical stems) in sorted stem order.
struct DatasetIndex {
  std::vector<DatasetRecord> records;
};

/// Throws DataError naming the missing directory or unmatched stems.
DatasetIndex build_dataset_index(const std::filesystem::path& root);

/// Sorted stem -> path map of the PNG files directly inside `dir`.
std::vector<std::pair<std::string, std::filesystem::path>> list_pngs(const std::filesystem::path& dir);

struct AugmentationSpec {
  bool horizontal_flip = true;
  std::vector<int> rotations{0, 90, 180, 270};

  static AugmentationSpec identity() { return {false, {0}}; }
  void validate() const;
  bool operator==(const AugmentationSpec&) const = default;
};

/// Element of the dihedral group: optional horizontal flip, then a clockwise
/// rotation by a multiple of 90 degrees.
struct Transform {
  bool flip = false;
  int rotation = 0;
};

ImageRGB apply_transform(const ImageRGB& img, Transform t);
ImageRGB invert_transform(const ImageRGB& img, Transform t);
ImageRGB flip_horizontal(const ImageRGB& img);
ImageRGB rotate_cw(const ImageRGB& img, int degrees);

/// Samples one transform from `spec` (flip with probability 1/2, rotation
/// uniform over the allowed set).
Transform sample_transform(const AugmentationSpec& spec, RngState& rng);

/// Applies one sampled transform to both patches.
std::pair<ImageRGB, ImageRGB> augment(const ImageRGB& hr, const ImageRGB& lr, const AugmentationSpec& spec,
                                      RngState& rng);

/// Aligned HR/LR crops: the LR window is the HR window divided by 4. The
/// offset is drawn uniformly over the positions valid in both images.
/// `name` identifies the image in error messages.
std::pair<ImageRGB, ImageRGB> random_crop_pair(const ImageRGB& hr, const ImageRGB& lr, std::size_t hr_crop,
                                               RngState& rng, const std::string& name = "image");

struct TrainingPair {
  std::string stem;
  ImageRGB hr;
  ImageRGB lr;
};

/// In-memory training set. Missing LR images are produced with degrade_x4
/// from the HR image trimmed to a multiple of 4.
class Dataset {
 public:
  explicit Dataset(const DatasetIndex& index);
  explicit Dataset(std::vector<TrainingPair> pairs);

  std::size_t size() const { return pairs_.size(); }
  const TrainingPair& operator[](std::size_t i) const { return pairs_.at(i); }

 private:
  std::vector<TrainingPair> pairs_;
};

struct Batch {
  Tensor hr;  // (b, 3, s, s)
  Tensor lr;  // (b, 3, s/4, s/4)
  std::vector<std::size_t> indices;
};

/// Endless, epoch-shuffled stream of augmented crop batches.
///
/// Sample number k of the stream is a pure function of (dataset, seed, k):
/// the epoch permutation and each sample's crop/augmentation draw come from
/// their own forked random streams. The iterator state is therefore just the
/// number of samples consumed, which makes resume exact.
class BatchIterator {
 public:
  BatchIterator(const Dataset& dataset, std::size_t batch, std::size_t hr_crop, AugmentationSpec spec,
                std::uint64_t seed);

  Batch next();
  std::uint64_t position() const { return position_; }
  void seek(std::uint64_t position) { position_ = position; }

  /// Dataset index of stream sample k.
  std::size_t sample_index(std::uint64_t k);

 private:
  const Dataset& dataset_;
  std::size_t batch_;
  std::size_t hr_crop_;
  AugmentationSpec spec_;
  RngState base_;
  std::uint64_t position_ = 0;
  std::uint64_t cached_epoch_ = ~std::uint64_t{0};
  std::vector<std::size_t> permutation_;
};

}  // namespace esrgan

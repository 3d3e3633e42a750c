#include "esrgan/data.hpp"

#include <algorithm>
#include <numeric>

#include "esrgan/errors.hpp"
#include "esrgan/resize.hpp"

namespace esrgan {

namespace fs = std::filesystem;

std::vector<std::pair<std::string, fs::path>> list_pngs(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw DataError("directory not found: " + dir.string());
  std::vector<std::pair<std::string, fs::path>> out;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    auto ext = entry.path().extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
    if (ext != ".png") continue;
    out.emplace_back(entry.path().stem().string(), entry.path());
  }
  std::sort(out.begin(), out.end());
  return out;
}

DatasetIndex build_dataset_index(const fs::path& root) {
  const fs::path hr_dir = root / "HR";
  const fs::path lr_dir = root / "LR";
  DatasetIndex index;
  const auto hr = list_pngs(hr_dir);
  const bool paired = fs::is_directory(lr_dir);
  std::vector<std::pair<std::string, fs::path>> lr;
  if (paired) lr = list_pngs(lr_dir);
  std::vector<std::string> missing;
  for (const auto& [stem, path] : hr) {
    DatasetRecord record{stem, path, std::nullopt};
    if (paired) {
      auto it = std::lower_bound(lr.begin(), lr.end(), std::make_pair(stem, fs::path{}));
      if (it == lr.end() || it->first != stem) {
        missing.push_back(stem);
        continue;
      }
      record.lr_path = it->second;
    }
    index.records.push_back(std::move(record));
  }
  if (!missing.empty()) {
    std::string list;
    for (const auto& m : missing) list += " " + m;
    throw DataError("LR images missing in " + lr_dir.string() + " for stems:" + list);
  }
  return index;
}

void AugmentationSpec::validate() const {
  for (int r : rotations) {
    if (r != 0 && r != 90 && r != 180 && r != 270) {
      throw ConfigError("augmentation rotations must be multiples of 90 in [0, 270], got " + std::to_string(r));
    }
  }
}

ImageRGB flip_horizontal(const ImageRGB& img) {
  ImageRGB out(img.height, img.width);
  for (std::size_t c = 0; c < 3; ++c) {
    for (std::size_t y = 0; y < img.height; ++y) {
      for (std::size_t x = 0; x < img.width; ++x) out.at(c, y, x) = img.at(c, y, img.width - 1 - x);
    }
  }
  return out;
}

ImageRGB rotate_cw(const ImageRGB& img, int degrees) {
  const int turns = ((degrees / 90) % 4 + 4) % 4;
  if (degrees % 90 != 0) throw ConfigError("rotation must be a multiple of 90 degrees");
  if (turns == 0) return img;
  const std::size_t h = img.height;
  const std::size_t w = img.width;
  ImageRGB out = turns == 2 ? ImageRGB(h, w) : ImageRGB(w, h);
  for (std::size_t c = 0; c < 3; ++c) {
    for (std::size_t y = 0; y < h; ++y) {
      for (std::size_t x = 0; x < w; ++x) {
        const double v = img.at(c, y, x);
        switch (turns) {
          case 1:
            out.at(c, x, h - 1 - y) = v;
            break;
          case 2:
            out.at(c, h - 1 - y, w - 1 - x) = v;
            break;
          default:
            out.at(c, w - 1 - x, y) = v;
            break;
        }
      }
    }
  }
  return out;
}

ImageRGB apply_transform(const ImageRGB& img, Transform t) {
  return rotate_cw(t.flip ? flip_horizontal(img) : img, t.rotation);
}

ImageRGB invert_transform(const ImageRGB& img, Transform t) {
  ImageRGB out = rotate_cw(img, 360 - t.rotation);
  return t.flip ? flip_horizontal(out) : out;
}

Transform sample_transform(const AugmentationSpec& spec, RngState& rng) {
  Transform t;
  t.flip = spec.horizontal_flip && rng.uniform() < 0.5;
  if (!spec.rotations.empty()) t.rotation = spec.rotations[rng.below(spec.rotations.size())];
  return t;
}

std::pair<ImageRGB, ImageRGB> augment(const ImageRGB& hr, const ImageRGB& lr, const AugmentationSpec& spec,
                                      RngState& rng) {
  spec.validate();
  const Transform t = sample_transform(spec, rng);
  return {apply_transform(hr, t), apply_transform(lr, t)};
}

std::pair<ImageRGB, ImageRGB> random_crop_pair(const ImageRGB& hr, const ImageRGB& lr, std::size_t hr_crop,
                                               RngState& rng, const std::string& name) {
  if (hr_crop == 0 || hr_crop % 4 != 0) throw ConfigError("hr_crop must be a positive multiple of 4");
  if (hr.height < hr_crop || hr.width < hr_crop) {
    throw DataError(name + ": image " + std::to_string(hr.height) + "x" + std::to_string(hr.width) +
                    " is smaller than the " + std::to_string(hr_crop) + " crop");
  }
  if (lr.height * 4 > hr.height || lr.width * 4 > hr.width) {
    throw DataError(name + ": LR image is larger than HR/4");
  }
  const std::size_t lr_crop = hr_crop / 4;
  if (lr.height < lr_crop || lr.width < lr_crop) throw DataError(name + ": LR image smaller than crop");
  const std::size_t top = rng.below(lr.height - lr_crop + 1);
  const std::size_t left = rng.below(lr.width - lr_crop + 1);
  return {crop(hr, top * 4, left * 4, hr_crop, hr_crop), crop(lr, top, left, lr_crop, lr_crop)};
}

Dataset::Dataset(const DatasetIndex& index) {
  if (index.records.empty()) throw DataError("dataset is empty");
  for (const auto& record : index.records) {
    TrainingPair pair;
    pair.stem = record.stem;
    ImageRGB hr = load_image(record.hr_path);
    if (record.lr_path) {
      pair.lr = load_image(*record.lr_path);
      if (hr.height != pair.lr.height * 4 || hr.width != pair.lr.width * 4) {
        throw DataError(record.lr_path->string() + ": LR size is not exactly HR/4 of " + record.hr_path.string());
      }
      pair.hr = std::move(hr);
    } else {
      const std::size_t h = hr.height / 4 * 4;
      const std::size_t w = hr.width / 4 * 4;
      if (h == 0 || w == 0) throw DataError(record.hr_path.string() + ": image smaller than 4x4");
      pair.hr = (h == hr.height && w == hr.width) ? std::move(hr) : crop(hr, 0, 0, h, w);
      pair.lr = degrade_x4(pair.hr);
    }
    pairs_.push_back(std::move(pair));
  }
}

Dataset::Dataset(std::vector<TrainingPair> pairs) : pairs_(std::move(pairs)) {
  if (pairs_.empty()) throw DataError("dataset is empty");
}

BatchIterator::BatchIterator(const Dataset& dataset, std::size_t batch, std::size_t hr_crop, AugmentationSpec spec,
                             std::uint64_t seed)
    : dataset_(dataset), batch_(batch), hr_crop_(hr_crop), spec_(std::move(spec)), base_(seed) {
  if (batch_ < 1) throw ConfigError("batch size must be >= 1");
  if (hr_crop_ == 0 || hr_crop_ % 4 != 0) throw ConfigError("hr_crop must be a positive multiple of 4");
  if (dataset_.size() == 0) throw DataError("dataset is empty");
  spec_.validate();
}

std::size_t BatchIterator::sample_index(std::uint64_t k) {
  const std::uint64_t n = dataset_.size();
  const std::uint64_t epoch = k / n;
  if (epoch != cached_epoch_) {
    permutation_.resize(n);
    std::iota(permutation_.begin(), permutation_.end(), std::size_t{0});
    RngState rng = base_.fork(1).fork(epoch);
    for (std::size_t i = n; i > 1; --i) std::swap(permutation_[i - 1], permutation_[rng.below(i)]);
    cached_epoch_ = epoch;
  }
  return permutation_[k % n];
}

Batch BatchIterator::next() {
  std::vector<ImageRGB> hr;
  std::vector<ImageRGB> lr;
  Batch batch;
  for (std::size_t b = 0; b < batch_; ++b) {
    const std::uint64_t k = position_++;
    const std::size_t idx = sample_index(k);
    const auto& pair = dataset_[idx];
    RngState rng = base_.fork(2).fork(k);
    auto [hr_patch, lr_patch] = random_crop_pair(pair.hr, pair.lr, hr_crop_, rng, pair.stem);
    auto [hr_aug, lr_aug] = augment(hr_patch, lr_patch, spec_, rng);
    hr.push_back(std::move(hr_aug));
    lr.push_back(std::move(lr_aug));
    batch.indices.push_back(idx);
  }
  batch.hr = images_to_tensor(hr);
  batch.lr = images_to_tensor(lr);
  return batch;
}

}  // namespace esrgan

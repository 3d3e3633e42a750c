#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "esrgan/data.hpp"
#include "esrgan/losses.hpp"
#include "esrgan/models.hpp"
#include "esrgan/optim.hpp"

namespace esrgan {

enum class Phase : std::uint8_t { PsnrPretrain = 0, Gan = 1 };

std::string_view to_string(Phase p);
/// Accepts "psnr_pretrain" / "pretrain" and "gan".
Phase parse_phase(std::string_view text);

struct TrainConfig {
  Phase phase = Phase::PsnrPretrain;
  std::int64_t total_iters = 100000;
  double base_lr = 1e-4;
  std::vector<std::int64_t> milestones{50000, 100000, 200000, 300000};
  /// Pretraining runs at a constant base_lr unless this is set.
  bool schedule_in_pretrain = false;
  int batch = 16;
  int hr_crop = 128;
  LossWeights loss;
  AdamHyper adam;
  std::uint64_t seed = 0;
  std::int64_t checkpoint_every = 5000;
  std::int64_t log_every = 100;
  /// Only affects the log: wall time is recorded as 0 so reruns are byte-identical.
  bool deterministic = false;
  GeneratorSpec generator;
  DiscriminatorSpec discriminator;
  FeatureExtractorSpec feature_extractor;
  AugmentationSpec augment;
  std::filesystem::path data_root;
  std::filesystem::path output_dir = "out";

  void validate() const;
  /// Every field that shapes the optimisation trajectory, one `key=value`
  /// per line. Iteration budget, cadence and paths are excluded.
  std::string canonical() const;
  std::uint64_t hash() const;
};

/// base_lr * 0.5^(number of milestones <= iteration).
double lr_at(std::int64_t iteration, double base_lr, std::span<const std::int64_t> milestones);

struct Checkpoint {
  Phase phase = Phase::PsnrPretrain;
  std::int64_t iteration = 0;  // completed iterations
  std::uint64_t config_hash = 0;
  std::uint64_t seed = 0;
  std::uint64_t data_position = 0;  // samples consumed by the batch stream
  std::vector<std::uint8_t> generator_weights;
  std::vector<std::uint8_t> discriminator_weights;  // empty before the GAN phase
  AdamState generator_adam;
  std::optional<AdamState> discriminator_adam;
};

std::vector<std::uint8_t> encode_checkpoint(const Checkpoint& c);
/// Throws IntegrityError on a corrupted or truncated file.
Checkpoint decode_checkpoint(std::span<const std::uint8_t> bytes);
void save_checkpoint(const Checkpoint& c, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);
bool is_checkpoint(std::span<const std::uint8_t> bytes);

struct StepStats {
  std::int64_t iteration = 0;  // 1-based index of the finished iteration
  double lr = 0.0;
  double loss_total = 0.0;
  double loss_pix = 0.0;  // unweighted pixel L1
  double loss_percep = 0.0;
  double loss_adv = 0.0;
  double d_loss = 0.0;
  double seconds = 0.0;
};

/// Owns the networks, optimisers and batch stream of one training phase.
///
/// Iteration i (0-based) draws batch i of the stream, uses lr_at(i) and, with
/// noise enabled, a noise stream forked from (seed, i). Everything is a pure
/// function of the configuration, so restore() followed by step() continues
/// an interrupted run exactly.
class Trainer {
 public:
  Trainer(TrainConfig config, const Dataset& dataset);

  /// GAN phase only: copies generator weights (a weight file or any
  /// checkpoint) as the starting point. Optimiser state starts fresh.
  void init_generator(std::span<const std::uint8_t> weights_or_checkpoint);
  /// Restores a checkpoint of the same phase and configuration hash.
  void restore(const Checkpoint& c);
  Checkpoint checkpoint() const;

  StepStats step();
  std::int64_t iteration() const { return iteration_; }
  double current_lr() const;

  const TrainConfig& config() const { return config_; }
  Generator& generator() { return *generator_; }
  const Generator& generator() const { return *generator_; }
  Discriminator* discriminator() { return discriminator_.get(); }
  const FeatureExtractor* feature_extractor() const { return feature_extractor_.get(); }
  const Batch& last_batch() const { return last_batch_; }

 private:
  StepStats pretrain_step(const Batch& batch, double lr);
  StepStats gan_step(const Batch& batch, double lr);
  RngState noise_stream(std::uint64_t purpose) const;

  TrainConfig config_;
  const Dataset& dataset_;
  std::unique_ptr<Generator> generator_;
  std::unique_ptr<Discriminator> discriminator_;
  std::unique_ptr<FeatureExtractor> feature_extractor_;
  AdamState g_adam_;
  std::optional<AdamState> d_adam_;
  BatchIterator batches_;
  std::int64_t iteration_ = 0;
  Batch last_batch_;
};

/// Append-only CSV log `iter,lr,loss_total,loss_pix,loss_percep,loss_adv,d_loss,seconds`.
class TrainLog {
 public:
  static constexpr std::string_view kHeader = "iter,lr,loss_total,loss_pix,loss_percep,loss_adv,d_loss,seconds";

  /// Starts a fresh log, or when `resume_from` is given keeps the existing
  /// rows up to that iteration and appends after them.
  TrainLog(const std::filesystem::path& path, std::optional<std::int64_t> resume_from = std::nullopt);
  void append(const StepStats& s);
  static std::string format_row(const StepStats& s);

 private:
  std::filesystem::path path_;
  std::ofstream out_;
  std::int64_t last_iteration_ = 0;
};

/// Trailing mean over the last `window` values ending at index `end` (exclusive).
double smoothed(std::span<const double> values, std::size_t end, std::size_t window);

struct RunOptions {
  std::optional<std::filesystem::path> resume;
  /// GAN phase starting weights; defaults to the pretrain phase's final checkpoint.
  std::optional<std::filesystem::path> init;
  std::function<void(const StepStats&)> on_step;
};

struct RunResult {
  std::int64_t final_iteration = 0;
  std::filesystem::path final_checkpoint;
  std::vector<StepStats> history;  // steps run in this invocation
};

/// Runs `config.phase` to total_iters under `<output_dir>/{checkpoints,logs}`,
/// writing a checkpoint every checkpoint_every iterations and at the end
/// (`<phase>_<iter>.ckpt` plus `<phase>_final.ckpt`). The finished generator's
/// output on the first training image goes to `images/<phase>_final_<stem>.png`.
RunResult run_training(const TrainConfig& config, const Dataset& dataset, const RunOptions& options = {});

std::filesystem::path checkpoint_path(const TrainConfig& config, Phase phase, std::int64_t iteration);
std::filesystem::path final_checkpoint_path(const TrainConfig& config, Phase phase);

}  // namespace esrgan

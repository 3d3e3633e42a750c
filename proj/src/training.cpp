#include "esrgan/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "esrgan/binary_io.hpp"
#include "esrgan/errors.hpp"
#include "esrgan/image.hpp"
#include "esrgan/ops.hpp"

namespace esrgan {

namespace fs = std::filesystem;

namespace {

constexpr std::string_view kCheckpointMagic = "ESRC";
constexpr std::uint32_t kCheckpointVersion = 1;

// Child streams of RngState(seed). The batch stream uses tags 1 and 2.
constexpr std::uint64_t kGeneratorInitTag = 100;
constexpr std::uint64_t kDiscriminatorInitTag = 101;
constexpr std::uint64_t kNoiseTag = 200;

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

template <typename T>
std::string join_list(const std::vector<T>& values) {
  std::string out;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i) out += ",";
    out += std::to_string(values[i]);
  }
  return out;
}

void write_adam(io::ByteWriter& w, const AdamState& s) {
  w.f64(s.hyper.beta1);
  w.f64(s.hyper.beta2);
  w.f64(s.hyper.eps);
  w.i64(s.step);
  w.u64(s.m.size());
  for (std::size_t i = 0; i < s.m.size(); ++i) {
    w.u64(s.m[i].size());
    w.f64s(s.m[i]);
    w.f64s(s.v[i]);
  }
}

AdamState read_adam(io::ByteReader& r) {
  AdamState s;
  s.hyper.beta1 = r.f64();
  s.hyper.beta2 = r.f64();
  s.hyper.eps = r.f64();
  s.step = r.i64();
  const std::uint64_t count = r.u64();
  if (count > r.remaining()) throw IntegrityError("checkpoint: implausible optimiser size");
  s.m.resize(count);
  s.v.resize(count);
  for (std::uint64_t i = 0; i < count; ++i) {
    const std::uint64_t len = r.u64();
    if (len > r.remaining() / 16) throw IntegrityError("checkpoint: optimiser record overruns file");
    s.m[i] = r.f64s(len);
    s.v[i] = r.f64s(len);
  }
  return s;
}

void check_adam_matches(const AdamState& s, const std::vector<Parameter>& params, const std::string& which) {
  bool ok = s.m.size() == params.size() && s.v.size() == params.size();
  for (std::size_t i = 0; ok && i < params.size(); ++i) {
    ok = s.m[i].size() == params[i].tensor.numel() && s.v[i].size() == params[i].tensor.numel();
  }
  if (!ok) throw IncompatibleError(which + " optimiser state does not match the model parameters");
}

void guard_finite(double value, const char* term, std::int64_t iteration) {
  if (!std::isfinite(value)) {
    throw NumericalError("non-finite " + std::string(term) + " loss (" + fmt_double(value) + ") at iteration " +
                         std::to_string(iteration));
  }
}

}  // namespace

std::string_view to_string(Phase p) { return p == Phase::Gan ? "gan" : "psnr_pretrain"; }

Phase parse_phase(std::string_view text) {
  if (text == "psnr_pretrain" || text == "pretrain") return Phase::PsnrPretrain;
  if (text == "gan") return Phase::Gan;
  throw ConfigError("unknown phase '" + std::string(text) + "' (expected psnr_pretrain or gan)");
}

void TrainConfig::validate() const {
  if (total_iters < 1) throw ConfigError("train.total_iters must be >= 1");
  if (!(base_lr > 0.0) || !std::isfinite(base_lr)) throw ConfigError("train.base_lr must be positive");
  for (std::size_t i = 0; i < milestones.size(); ++i) {
    if (milestones[i] < 0) throw ConfigError("train.milestones must be non-negative");
    if (i > 0 && milestones[i] <= milestones[i - 1]) throw ConfigError("train.milestones must be strictly increasing");
  }
  if (batch < 1) throw ConfigError("train.batch must be >= 1");
  if (hr_crop < 4 || hr_crop % 4 != 0) throw ConfigError("train.hr_crop must be a positive multiple of 4");
  if (checkpoint_every < 1) throw ConfigError("train.checkpoint_every must be >= 1");
  if (log_every < 1) throw ConfigError("train.log_every must be >= 1");
  if (!(adam.beta1 >= 0.0 && adam.beta1 < 1.0 && adam.beta2 >= 0.0 && adam.beta2 < 1.0 && adam.eps > 0.0)) {
    throw ConfigError("adam hyperparameters out of range");
  }
  loss.validate();
  generator.validate();
  augment.validate();
  if (phase == Phase::Gan) {
    discriminator.validate();
    feature_extractor.validate();
    if (discriminator.input_size != hr_crop) {
      throw ConfigError("discriminator.input_size (" + std::to_string(discriminator.input_size) +
                        ") must equal train.hr_crop (" + std::to_string(hr_crop) + ")");
    }
  }
}

std::string TrainConfig::canonical() const {
  std::ostringstream s;
  s << "phase=" << to_string(phase) << "\n";
  s << "base_lr=" << fmt_double(base_lr) << "\n";
  s << "milestones=" << join_list(milestones) << "\n";
  s << "schedule_in_pretrain=" << schedule_in_pretrain << "\n";
  s << "batch=" << batch << "\n";
  s << "hr_crop=" << hr_crop << "\n";
  s << "seed=" << seed << "\n";
  s << "loss=" << fmt_double(loss.perceptual) << "," << fmt_double(loss.adversarial) << "," << fmt_double(loss.pixel)
    << "\n";
  s << "adam=" << fmt_double(adam.beta1) << "," << fmt_double(adam.beta2) << "," << fmt_double(adam.eps) << "\n";
  s << "generator=" << generator.num_blocks << "," << generator.num_features << "," << generator.growth_channels << ","
    << generator.dense_layers << "," << generator.scale << "," << to_string(generator.variant) << ","
    << generator.noise_enabled << "," << fmt_double(generator.residual_scaling) << "," << generator.noise_after_rrdb
    << "\n";
  if (phase == Phase::Gan) {
    s << "discriminator=" << discriminator.input_size << "," << discriminator.base_channels << ","
      << discriminator.num_downsample_stages << "," << discriminator.use_batchnorm << ","
      << discriminator.hidden_features << "\n";
    s << "feature_extractor=" << join_list(feature_extractor.channels) << ";" << feature_extractor.tap_depth << ";"
      << feature_extractor.seed << "\n";
  }
  s << "augment=" << augment.horizontal_flip << ";" << join_list(augment.rotations) << "\n";
  return s.str();
}

std::uint64_t TrainConfig::hash() const { return io::fnv1a(canonical()); }

double lr_at(std::int64_t iteration, double base_lr, std::span<const std::int64_t> milestones) {
  if (iteration < 0) throw std::invalid_argument("lr_at: iteration must be >= 0");
  double lr = base_lr;
  for (std::int64_t m : milestones) {
    if (m <= iteration) lr *= 0.5;
  }
  return lr;
}

std::vector<std::uint8_t> encode_checkpoint(const Checkpoint& c) {
  io::ByteWriter w;
  w.raw({reinterpret_cast<const std::uint8_t*>(kCheckpointMagic.data()), kCheckpointMagic.size()});
  w.u32(kCheckpointVersion);
  w.u8(static_cast<std::uint8_t>(c.phase));
  w.i64(c.iteration);
  w.u64(c.config_hash);
  w.u64(c.seed);
  w.u64(c.data_position);
  w.blob(c.generator_weights);
  w.blob(c.discriminator_weights);
  write_adam(w, c.generator_adam);
  w.u8(c.discriminator_adam ? 1 : 0);
  if (c.discriminator_adam) write_adam(w, *c.discriminator_adam);
  w.seal();
  return w.take();
}

Checkpoint decode_checkpoint(std::span<const std::uint8_t> bytes) {
  auto payload = io::verify_sealed(bytes, "checkpoint");
  io::ByteReader r(payload, "checkpoint");
  r.expect_magic(kCheckpointMagic);
  const std::uint32_t version = r.u32();
  if (version != kCheckpointVersion) throw IntegrityError("checkpoint: unsupported version " + std::to_string(version));
  Checkpoint c;
  const std::uint8_t phase = r.u8();
  if (phase > 1) throw IntegrityError("checkpoint: unknown phase tag");
  c.phase = static_cast<Phase>(phase);
  c.iteration = r.i64();
  c.config_hash = r.u64();
  c.seed = r.u64();
  c.data_position = r.u64();
  c.generator_weights = r.blob();
  c.discriminator_weights = r.blob();
  c.generator_adam = read_adam(r);
  if (r.u8()) c.discriminator_adam = read_adam(r);
  r.expect_done();
  return c;
}

void save_checkpoint(const Checkpoint& c, const fs::path& path) { io::write_file_atomic(path, encode_checkpoint(c)); }

Checkpoint load_checkpoint(const fs::path& path) { return decode_checkpoint(io::read_file(path)); }

bool is_checkpoint(std::span<const std::uint8_t> bytes) {
  return bytes.size() >= kCheckpointMagic.size() &&
         std::equal(kCheckpointMagic.begin(), kCheckpointMagic.end(), bytes.begin());
}

Trainer::Trainer(TrainConfig config, const Dataset& dataset)
    : config_((config.validate(), std::move(config))),
      dataset_(dataset),
      batches_(dataset, static_cast<std::size_t>(config_.batch), static_cast<std::size_t>(config_.hr_crop),
               config_.augment, config_.seed) {
  RngState g_rng = RngState(config_.seed).fork(kGeneratorInitTag);
  generator_ = std::make_unique<Generator>(config_.generator, g_rng);
  g_adam_ = make_adam_state(generator_->parameters(), config_.adam);
  if (config_.phase == Phase::Gan) {
    RngState d_rng = RngState(config_.seed).fork(kDiscriminatorInitTag);
    discriminator_ = std::make_unique<Discriminator>(config_.discriminator, d_rng);
    d_adam_ = make_adam_state(discriminator_->parameters(), config_.adam);
    feature_extractor_ = std::make_unique<FeatureExtractor>(config_.feature_extractor);
  }
}

void Trainer::init_generator(std::span<const std::uint8_t> weights_or_checkpoint) {
  if (config_.phase != Phase::Gan) throw ConfigError("generator initialisation applies to the GAN phase only");
  if (iteration_ != 0) throw ConfigError("generator initialisation must precede the first iteration");
  if (is_checkpoint(weights_or_checkpoint)) {
    const Checkpoint c = decode_checkpoint(weights_or_checkpoint);
    decode_weights(*generator_, c.generator_weights);
  } else {
    decode_weights(*generator_, weights_or_checkpoint);
  }
}

void Trainer::restore(const Checkpoint& c) {
  if (c.phase != config_.phase) {
    throw ConfigError("checkpoint is from phase " + std::string(to_string(c.phase)) + ", run is " +
                      std::string(to_string(config_.phase)));
  }
  if (c.config_hash != config_.hash()) {
    throw ConfigError("checkpoint configuration hash does not match the current configuration");
  }
  decode_weights(*generator_, c.generator_weights);
  check_adam_matches(c.generator_adam, generator_->parameters(), "generator");
  if (config_.phase == Phase::Gan) {
    if (c.discriminator_weights.empty() || !c.discriminator_adam) {
      throw IntegrityError("GAN checkpoint lacks discriminator state");
    }
    decode_weights(*discriminator_, c.discriminator_weights);
    check_adam_matches(*c.discriminator_adam, discriminator_->parameters(), "discriminator");
    d_adam_ = c.discriminator_adam;
  }
  g_adam_ = c.generator_adam;
  iteration_ = c.iteration;
  batches_.seek(c.data_position);
}

Checkpoint Trainer::checkpoint() const {
  Checkpoint c;
  c.phase = config_.phase;
  c.iteration = iteration_;
  c.config_hash = config_.hash();
  c.seed = config_.seed;
  c.data_position = batches_.position();
  c.generator_weights = encode_weights(*generator_);
  c.generator_adam = g_adam_;
  if (discriminator_) {
    c.discriminator_weights = encode_weights(*discriminator_);
    c.discriminator_adam = d_adam_;
  }
  return c;
}

double Trainer::current_lr() const {
  if (config_.phase == Phase::PsnrPretrain && !config_.schedule_in_pretrain) return config_.base_lr;
  return lr_at(iteration_, config_.base_lr, config_.milestones);
}

RngState Trainer::noise_stream(std::uint64_t purpose) const {
  return RngState(config_.seed).fork(kNoiseTag).fork(static_cast<std::uint64_t>(iteration_)).fork(purpose);
}

StepStats Trainer::step() {
  const auto start = std::chrono::steady_clock::now();
  const double lr = current_lr();
  last_batch_ = batches_.next();
  StepStats s = config_.phase == Phase::Gan ? gan_step(last_batch_, lr) : pretrain_step(last_batch_, lr);
  ++iteration_;
  s.iteration = iteration_;
  s.lr = lr;
  s.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return s;
}

StepStats Trainer::pretrain_step(const Batch& batch, double lr) {
  const auto& params = generator_->parameters();
  RngState noise = noise_stream(0);
  const Tensor sr = generator_->forward(batch.lr, &noise);
  const Tensor loss = pixel_l1(sr, batch.hr);
  guard_finite(loss.item(), "pixel", iteration_ + 1);
  zero_grad(params);
  loss.backward();
  adam_step(params, g_adam_, lr);
  StepStats s;
  s.loss_pix = loss.item();
  s.loss_total = s.loss_pix;
  return s;
}

StepStats Trainer::gan_step(const Batch& batch, double lr) {
  const auto& g_params = generator_->parameters();
  const auto& d_params = discriminator_->parameters();
  StepStats s;

  // Discriminator update against detached generator output.
  {
    Tensor sr;
    {
      NoGradGuard no_grad;
      RngState noise = noise_stream(0);
      sr = generator_->forward(batch.lr, &noise);
    }
    set_requires_grad(d_params, true);
    const Tensor real = discriminator_->forward(batch.hr);
    const Tensor fake = discriminator_->forward(sr);
    const Tensor d_loss = ragan_d_loss(real, fake);
    guard_finite(d_loss.item(), "discriminator", iteration_ + 1);
    zero_grad(d_params);
    d_loss.backward();
    adam_step(d_params, *d_adam_, lr);
    s.d_loss = d_loss.item();
  }

  // Generator update with a fresh forward pass and a frozen discriminator.
  set_requires_grad(d_params, false);
  RngState noise = noise_stream(1);
  const Tensor sr = generator_->forward(batch.lr, &noise);
  const Tensor real = discriminator_->forward(batch.hr);
  const Tensor fake = discriminator_->forward(sr);
  const GeneratorLossTerms terms =
      total_generator_loss(sr, batch.hr, real, fake, *feature_extractor_, config_.loss);
  guard_finite(terms.perceptual.item(), "perceptual", iteration_ + 1);
  guard_finite(terms.adversarial.item(), "adversarial", iteration_ + 1);
  guard_finite(terms.pixel.item(), "pixel", iteration_ + 1);
  guard_finite(terms.total.item(), "total", iteration_ + 1);
  zero_grad(g_params);
  terms.total.backward();
  adam_step(g_params, g_adam_, lr);
  set_requires_grad(d_params, true);

  s.loss_total = terms.total.item();
  s.loss_pix = terms.pixel.item();
  s.loss_percep = terms.perceptual.item();
  s.loss_adv = terms.adversarial.item();
  return s;
}

TrainLog::TrainLog(const fs::path& path, std::optional<std::int64_t> resume_from) : path_(path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::vector<std::string> kept;
  if (resume_from && fs::exists(path)) {
    std::ifstream in(path);
    std::string line;
    std::getline(in, line);
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      const std::int64_t iter = std::stoll(line.substr(0, line.find(',')));
      if (iter > *resume_from) break;
      kept.push_back(line);
      last_iteration_ = iter;
    }
  }
  out_.open(path, std::ios::trunc);
  if (!out_) throw DataError("cannot write log " + path.string());
  out_ << kHeader << "\n";
  for (const auto& line : kept) out_ << line << "\n";
  out_.flush();
}

std::string TrainLog::format_row(const StepStats& s) {
  char buf[256];
  std::snprintf(buf, sizeof buf, "%lld,%.6g,%.8f,%.8f,%.8f,%.8f,%.8f,%.3f", static_cast<long long>(s.iteration), s.lr,
                s.loss_total, s.loss_pix, s.loss_percep, s.loss_adv, s.d_loss, s.seconds);
  return buf;
}

void TrainLog::append(const StepStats& s) {
  if (s.iteration <= last_iteration_) throw std::logic_error("TrainLog rows must have increasing iterations");
  out_ << format_row(s) << "\n";
  out_.flush();
  last_iteration_ = s.iteration;
}

double smoothed(std::span<const double> values, std::size_t end, std::size_t window) {
  if (end == 0 || end > values.size() || window == 0) throw std::out_of_range("smoothed: bad range");
  const std::size_t begin = end > window ? end - window : 0;
  double acc = 0.0;
  for (std::size_t i = begin; i < end; ++i) acc += values[i];
  return acc / static_cast<double>(end - begin);
}

fs::path checkpoint_path(const TrainConfig& config, Phase phase, std::int64_t iteration) {
  char name[64];
  std::snprintf(name, sizeof name, "%s_%08lld.ckpt", std::string(to_string(phase)).c_str(),
                static_cast<long long>(iteration));
  return config.output_dir / "checkpoints" / name;
}

fs::path final_checkpoint_path(const TrainConfig& config, Phase phase) {
  return config.output_dir / "checkpoints" / (std::string(to_string(phase)) + "_final.ckpt");
}

RunResult run_training(const TrainConfig& config, const Dataset& dataset, const RunOptions& options) {
  Trainer trainer(config, dataset);
  if (options.resume) {
    trainer.restore(load_checkpoint(*options.resume));
  } else if (config.phase == Phase::Gan) {
    const fs::path init = options.init.value_or(final_checkpoint_path(config, Phase::PsnrPretrain));
    if (!fs::exists(init)) {
      throw ConfigError("GAN phase needs initial generator weights; not found: " + init.string());
    }
    trainer.init_generator(io::read_file(init));
  }

  fs::create_directories(config.output_dir / "checkpoints");
  const fs::path log_path = config.output_dir / "logs" / (std::string(to_string(config.phase)) + ".csv");
  TrainLog log(log_path, options.resume ? std::optional<std::int64_t>(trainer.iteration()) : std::nullopt);

  RunResult result;
  while (trainer.iteration() < config.total_iters) {
    StepStats s = trainer.step();
    if (config.deterministic) s.seconds = 0.0;
    result.history.push_back(s);
    if (options.on_step) options.on_step(s);
    if (s.iteration % config.log_every == 0 || s.iteration == config.total_iters) log.append(s);
    if (s.iteration % config.checkpoint_every == 0) {
      save_checkpoint(trainer.checkpoint(), checkpoint_path(config, config.phase, s.iteration));
    }
  }
  const Checkpoint last = trainer.checkpoint();
  result.final_checkpoint = final_checkpoint_path(config, config.phase);
  save_checkpoint(last, result.final_checkpoint);
  result.final_iteration = trainer.iteration();

  // A full-size preview of the first training image, for eyeballing progress.
  const TrainingPair& sample = dataset[0];
  Tensor preview;
  {
    NoGradGuard no_grad;
    RngState noise = RngState(config.seed).fork(300);
    preview = trainer.generator().forward(images_to_tensor({sample.lr}), &noise);
  }
  fs::create_directories(config.output_dir / "images");
  save_image(tensor_to_image(preview),
             config.output_dir / "images" / (std::string(to_string(config.phase)) + "_final_" + sample.stem + ".png"));
  return result;
}

}  // namespace esrgan

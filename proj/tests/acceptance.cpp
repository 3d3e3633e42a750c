// Acceptance checks: one PASS/FAIL line per criterion, exit status 1 if any fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numbers>
#include <string>
#include <vector>

#include "esrgan/config.hpp"
#include "esrgan/image.hpp"
#include "esrgan/losses.hpp"
#include "esrgan/metrics.hpp"
#include "esrgan/models.hpp"
#include "esrgan/niqe.hpp"
#include "esrgan/ops.hpp"
#include "esrgan/resize.hpp"
#include "esrgan/training.hpp"
#include "support.hpp"

using namespace esrgan;
using esrgan::testing::gradient_check;
using esrgan::testing::random_tensor;
using esrgan::testing::synthetic_image;

namespace {

struct Verdict {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* format, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, format, v);
  return buf;
}

Tensor away_from_zero(Shape s, RngState& rng) {
  std::vector<double> d(s.numel());
  for (double& v : d) {
    const double mag = 0.05 + 0.95 * rng.uniform();
    v = rng.uniform() < 0.5 ? -mag : mag;
  }
  return Tensor::from_data(s, std::move(d));
}

Tensor logits(std::vector<double> v) {
  const std::size_t n = v.size();
  return Tensor::from_data(Shape{n, 1, 1, 1}, std::move(v));
}

double min_abs(const Tensor& t) {
  double m = INFINITY;
  for (double v : t.data()) m = std::min(m, std::abs(v));
  return m;
}

std::vector<double> values(const Tensor& t) { return {t.data().begin(), t.data().end()}; }

// ---------------------------------------------------------------------------

Verdict autodiff_soundness() {
  constexpr int kInstances = 20;
  constexpr double kTol = 1e-4;
  using Loss = std::function<Tensor(const std::vector<Tensor>&)>;
  struct Family {
    const char* name;
    std::function<std::pair<Loss, std::vector<Tensor>>(RngState&, int)> make;
  };
  const std::vector<Family> families{
      {"conv2d",
       [](RngState& rng, int i) {
         const int stride = 1 + i % 2;
         const int pad = i % 3 == 0 ? 0 : 1;
         Tensor x = random_tensor(Shape{1 + static_cast<std::size_t>(i % 2), 2, 5, 6}, rng);
         Tensor w = random_tensor(Shape{3, 2, 3, 3}, rng);
         Tensor b = random_tensor(Shape{1, 3, 1, 1}, rng);
         return std::pair{Loss([=](const std::vector<Tensor>& in) {
                            return ops::sum(ops::conv2d(in[0], in[1], in[2], stride, pad));
                          }),
                          std::vector<Tensor>{x, w, b}};
       }},
      {"leaky_relu",
       [](RngState& rng, int) {
         Tensor x = away_from_zero(Shape{2, 2, 3, 3}, rng);
         Tensor weights = random_tensor(Shape{2, 2, 3, 3}, rng);
         return std::pair{Loss([=](const std::vector<Tensor>& in) {
                            return ops::sum(ops::mul(ops::leaky_relu(in[0], 0.2), weights));
                          }),
                          std::vector<Tensor>{x}};
       }},
      {"upsample",
       [](RngState& rng, int i) {
         const int f = 1 + i % 4;
         const auto fs = static_cast<std::size_t>(f);
         Tensor x = random_tensor(Shape{1, 2, 3, 2}, rng);
         Tensor weights = random_tensor(Shape{1, 2, 3 * fs, 2 * fs}, rng);
         return std::pair{Loss([=](const std::vector<Tensor>& in) {
                            return ops::sum(ops::mul(ops::upsample_nearest(in[0], f), weights));
                          }),
                          std::vector<Tensor>{x}};
       }},
      {"concat",
       [](RngState& rng, int) {
         Tensor a = random_tensor(Shape{2, 1, 3, 3}, rng);
         Tensor b = random_tensor(Shape{2, 3, 3, 3}, rng);
         Tensor weights = random_tensor(Shape{2, 4, 3, 3}, rng);
         return std::pair{Loss([=](const std::vector<Tensor>& in) {
                            return ops::sum(ops::mul(ops::concat_channels({in[0], in[1]}), weights));
                          }),
                          std::vector<Tensor>{a, b}};
       }},
      {"add",
       [](RngState& rng, int) {
         Tensor a = random_tensor(Shape{2, 2, 3, 3}, rng);
         Tensor b = random_tensor(Shape{2, 2, 3, 3}, rng);
         Tensor weights = random_tensor(Shape{2, 2, 3, 3}, rng);
         return std::pair{Loss([=](const std::vector<Tensor>& in) {
                            Tensor s = ops::add(in[0], in[1]);
                            return ops::sum(ops::mul(ops::mul(s, s), weights));
                          }),
                          std::vector<Tensor>{a, b}};
       }},
      {"mean",
       [](RngState& rng, int) {
         Tensor a = random_tensor(Shape{2, 3, 2, 4}, rng);
         return std::pair{Loss([](const std::vector<Tensor>& in) { return ops::mean(ops::mul(in[0], in[0])); }),
                          std::vector<Tensor>{a}};
       }},
      {"l1",
       [](RngState& rng, int) {
         Tensor a = random_tensor(Shape{1, 2, 3, 3}, rng);
         Tensor b = ops::add(a.detach(), away_from_zero(Shape{1, 2, 3, 3}, rng));
         return std::pair{Loss([](const std::vector<Tensor>& in) { return ops::l1_distance(in[0], in[1]); }),
                          std::vector<Tensor>{a, b}};
       }},
      {"composed",
       [](RngState& rng, int) {
         // Redraw until no leaky_relu or L1 argument sits within a finite-difference step of its kink.
         Tensor x, w1, w2, target;
         for (bool clear = false; !clear;) {
           x = random_tensor(Shape{1, 2, 6, 6}, rng);
           w1 = random_tensor(Shape{3, 2, 3, 3}, rng, -0.5, 0.5);
           w2 = random_tensor(Shape{2, 5, 3, 3}, rng, -0.5, 0.5);
           target = random_tensor(Shape{1, 2, 12, 12}, rng);
           NoGradGuard no_grad;
           const Tensor pre = ops::conv2d(x, w1, Tensor(), 1, 1);
           const Tensor cat = ops::concat_channels({x, ops::leaky_relu(pre, 0.2)});
           const Tensor y = ops::upsample_nearest(ops::conv2d(cat, w2, Tensor(), 1, 1), 2);
           const Tensor gap = ops::sub(ops::scale(y, 0.3), target);
           clear = min_abs(pre) > 1e-3 && min_abs(gap) > 1e-3;
         }
         return std::pair{Loss([=](const std::vector<Tensor>& in) {
                            Tensor h = ops::leaky_relu(ops::conv2d(in[0], in[1], Tensor(), 1, 1), 0.2);
                            Tensor cat = ops::concat_channels({in[0], h});
                            Tensor y = ops::upsample_nearest(ops::conv2d(cat, in[2], Tensor(), 1, 1), 2);
                            return ops::add(ops::mean(ops::mul(y, y)), ops::l1_distance(ops::scale(y, 0.3), target));
                          }),
                          std::vector<Tensor>{x, w1, w2}};
       }},
  };

  RngState rng(1001);
  double worst = 0.0;
  std::string worst_family;
  int count = 0;
  for (const auto& f : families) {
    for (int i = 0; i < kInstances; ++i) {
      auto [loss, inputs] = f.make(rng, i);
      const double err = gradient_check(loss, inputs, 1e-5);
      if (!(err <= worst)) {
        worst = err;
        worst_family = f.name;
      }
      ++count;
    }
  }
  return {worst < kTol, std::to_string(count) + " instances over " + std::to_string(families.size()) +
                            " op families, worst relative error " + fmt("%.2e", worst) + " (" + worst_family +
                            "), tolerance 1e-4"};
}

Verdict parameter_counts() {
  RngState pick(2002);
  bool ok = true;
  std::string detail;
  for (int trial = 0; trial < 3; ++trial) {
    GeneratorSpec s;
    s.num_blocks = 1 + static_cast<int>(pick.below(6));
    s.num_features = 4 + static_cast<int>(pick.below(61));
    s.growth_channels = 2 + static_cast<int>(pick.below(31));
    RngState rng(trial);
    s.variant = BlockVariant::DenseBlock;
    const std::size_t rrdb = param_count(Generator(s, rng));
    s.variant = BlockVariant::ResidualDenseBlock;
    const std::size_t rrdrb = param_count(Generator(s, rng));
    s.noise_enabled = true;
    const std::size_t noisy = param_count(Generator(s, rng));
    const auto extra = static_cast<std::size_t>(s.num_blocks * 3 * s.num_features);
    ok = ok && rrdb == rrdrb && noisy - rrdrb == extra;
    detail += (trial ? "; " : "") + std::string("(") + std::to_string(s.num_blocks) + "," +
              std::to_string(s.num_features) + "," + std::to_string(s.growth_channels) + ") rrdb " +
              std::to_string(rrdb) + " rrdrb " + std::to_string(rrdrb) + " noise +" + std::to_string(noisy - rrdrb);
  }
  return {ok, detail};
}

Verdict noise_degeneracy() {
  GeneratorSpec spec;
  spec.num_blocks = 4;
  spec.num_features = 32;
  spec.growth_channels = 16;
  spec.noise_enabled = true;
  RngState init(3003);
  Generator noisy(spec, init);
  for (const auto& p : noisy.noise_scales()) {
    Tensor t = p.tensor;
    std::fill(t.mutable_data().begin(), t.mutable_data().end(), 0.0);
  }
  spec.noise_enabled = false;
  RngState other(3004);
  Generator plain(spec, other);
  const std::size_t copied = transplant_parameters(noisy.parameters(), plain.parameters());
  bool ok = copied == plain.parameters().size();
  RngState rng(3005);
  int identical = 0;
  for (int trial = 0; trial < 5; ++trial) {
    Tensor lr = random_tensor(Shape{1, 3, 12 + static_cast<std::size_t>(trial), 10}, rng, 0.0, 1.0);
    RngState noise(static_cast<std::uint64_t>(trial));
    NoGradGuard no_grad;
    if (values(noisy.forward(lr, &noise)) == values(plain.forward(lr, nullptr))) ++identical;
  }
  ok = ok && identical == 5;
  return {ok, std::to_string(identical) + "/5 inputs bit-identical after transplanting " + std::to_string(copied) +
                  " tensors"};
}

Verdict ragan_analytics() {
  const double two_ln2 = 2.0 * std::numbers::ln2;
  RngState rng(4004);
  double equal_err = 0.0;
  double shift_err = 0.0;
  double sym_err = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t n = 1 + rng.below(8);
    const double c = -10.0 + 20.0 * rng.uniform();
    std::vector<double> same(n, c);
    equal_err = std::max(equal_err, std::abs(ragan_d_loss(logits(same), logits(same)).item() - two_ln2));

    std::vector<double> r(n);
    std::vector<double> f(n);
    for (double& v : r) v = -3.0 + 6.0 * rng.uniform();
    for (double& v : f) v = -3.0 + 6.0 * rng.uniform();
    const double base_d = ragan_d_loss(logits(r), logits(f)).item();
    const double base_g = ragan_g_loss(logits(r), logits(f)).item();
    for (double offset : {-100.0, -37.5, 1e-3, 12.0, 100.0}) {
      std::vector<double> rs = r;
      std::vector<double> fs = f;
      for (double& v : rs) v += offset;
      for (double& v : fs) v += offset;
      shift_err = std::max(shift_err, std::abs(ragan_d_loss(logits(rs), logits(fs)).item() - base_d));
      shift_err = std::max(shift_err, std::abs(ragan_g_loss(logits(rs), logits(fs)).item() - base_g));
    }
    sym_err = std::max(sym_err, std::abs(base_g - ragan_d_loss(logits(f), logits(r)).item()));
  }
  const bool ok = equal_err <= 1e-9 && shift_err <= 1e-10 && sym_err <= 1e-12;
  return {ok, "equal logits |L - 2ln2| " + fmt("%.1e", equal_err) + " (tol 1e-9), shift up to 100 " +
                  fmt("%.1e", shift_err) + " (tol 1e-10), role swap " + fmt("%.1e", sym_err) + " (tol 1e-12)"};
}

Verdict schedule_fidelity() {
  const std::vector<std::int64_t> m{50000, 100000, 200000, 300000};
  const std::vector<std::pair<std::int64_t, double>> expected{
      {0, 1e-4}, {49999, 1e-4}, {50000, 5e-5}, {99999, 5e-5}, {100000, 2.5e-5}, {199999, 2.5e-5},
      {200000, 1.25e-5}, {299999, 1.25e-5}, {300000, 6.25e-6}, {1000000000, 6.25e-6}};
  int exact = 0;
  for (const auto& [it, lr] : expected) exact += lr_at(it, 1e-4, m) == lr ? 1 : 0;
  return {exact == static_cast<int>(expected.size()),
          std::to_string(exact) + "/" + std::to_string(expected.size()) +
              " schedule points exact: 1e-4, 5e-5, 2.5e-5, 1.25e-5, 6.25e-6 at 0/50k/100k/200k/300k"};
}

Verdict loss_composition() {
  const LossWeights w;  // perceptual 1, lambda 5e-3, eta 1e-2
  const double two_ln2 = 2.0 * std::numbers::ln2;
  const double got =
      combine_generator_loss(Tensor::scalar(1.0), Tensor::scalar(two_ln2), Tensor::scalar(0.3), w).item();
  const double hand = 1.0 + 5e-3 * two_ln2 + 1e-2 * 0.3;
  const double err = std::abs(got - hand);
  const bool weights_ok = w.perceptual == 1.0 && w.adversarial == 5e-3 && w.pixel == 1e-2;
  return {weights_ok && err <= 1e-12, "L(1, 2ln2, 0.3) = " + fmt("%.9f", got) + ", hand value " + fmt("%.9f", hand) +
                                          ", |diff| " + fmt("%.1e", err) + " (tol 1e-12)"};
}

Verdict metrics_protocol() {
  const double pi = perceptual_index(10.0, 4.0);

  Plane a(32, 32, 100.0 / 255.0);
  Plane b(32, 32, 101.0 / 255.0);
  const double uniform = psnr(a, b, 0);
  const double psnr_err = std::abs(uniform - 48.1308);

  RngState rng(7007);
  double oracle_err = 0.0;
  for (int trial = 0; trial < 10; ++trial) {
    ImageRGB x(20, 18);
    ImageRGB y(20, 18);
    for (double& v : x.pixels) v = rng.uniform();
    for (double& v : y.pixels) v = rng.uniform();
    double sse = 0.0;
    int count = 0;
    for (std::size_t r = 4; r < 16; ++r) {
      for (std::size_t c = 4; c < 14; ++c) {
        auto luma = [&](const ImageRGB& im) {
          return (16.0 + 65.481 * im.at(0, r, c) + 128.553 * im.at(1, r, c) + 24.966 * im.at(2, r, c)) / 255.0;
        };
        const double d = luma(x) - luma(y);
        sse += d * d;
        ++count;
      }
    }
    const double naive = 10.0 * std::log10(1.0 / (sse / count));
    oracle_err = std::max(oracle_err, std::abs(psnr_y(x, y, 4) - naive));
  }

  constexpr int kPatch = 32;
  std::vector<ImageRGB> corpus;
  for (std::uint64_t i = 0; i < 10; ++i) corpus.push_back(synthetic_image(128, 128, 500 + i));
  const niqe::NiqeModel model = niqe::fit_pristine_model(corpus, kPatch);
  const niqe::NiqeModel refit = niqe::fit_pristine_model(corpus, kPatch);
  bool deterministic = niqe::encode_model(model) == niqe::encode_model(refit);
  int ordered = 0;
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    ImageRGB noised = corpus[i];
    RngState nrng(40 + i);
    for (double& v : noised.pixels) v = std::clamp(v + 0.1 * nrng.normal(), 0.0, 1.0);
    const double clean = niqe::niqe_score(corpus[i], model);
    deterministic = deterministic && clean == niqe::niqe_score(corpus[i], model);
    if (clean < niqe::niqe_score(noised, model)) ++ordered;
  }

  const bool ok = pi == 2.0 && psnr_err <= 1e-3 && oracle_err <= 1e-9 && deterministic && ordered == 10;
  return {ok, "PI(10,4) = " + fmt("%g", pi) + "; uniform 1/255 Y step " + fmt("%.4f", uniform) +
                  " dB (tol 1e-3); oracle |diff| " + fmt("%.1e", oracle_err) + " dB (tol 1e-9); NIQE " +
                  (deterministic ? "deterministic" : "NOT deterministic") + ", pristine < noised on " +
                  std::to_string(ordered) + "/10"};
}

Verdict bicubic_resampling() {
  double unity = 0.0;
  for (std::size_t in : {3u, 8u, 17u, 64u}) {
    for (std::size_t out : {1u, 2u, 5u, 32u, 200u}) {
      for (bool aa : {false, true}) {
        for (const auto& t : resample_taps(in, out, aa)) {
          double sum = 0.0;
          for (double w : t.weight) sum += w;
          unity = std::max(unity, std::abs(sum - 1.0));
        }
      }
    }
  }

  double constant = 0.0;
  const ImageRGB flat(24, 20, 0.37);
  for (auto [h, w] : {std::pair<std::size_t, std::size_t>{6, 5}, {24, 20}, {50, 9}}) {
    for (double v : bicubic_resize(flat, h, w).pixels) constant = std::max(constant, std::abs(v - 0.37));
  }

  std::vector<double> plane(64);
  Eigen::MatrixXd in(8, 8);
  for (int y = 0; y < 8; ++y) {
    for (int x = 0; x < 8; ++x) in(y, x) = plane[static_cast<std::size_t>(y * 8 + x)] = (y * 8.0 + x) / 63.0;
  }
  const Eigen::MatrixXd op = esrgan::testing::dense_resample_matrix(8, 2, true);
  const Eigen::MatrixXd expected = op * in * op.transpose();
  const auto got = bicubic_resize_plane(plane, 8, 8, 2, 2, true);
  double oracle = 0.0;
  for (int y = 0; y < 2; ++y) {
    for (int x = 0; x < 2; ++x) oracle = std::max(oracle, std::abs(got[static_cast<std::size_t>(y * 2 + x)] - expected(y, x)));
  }

  const bool ok = unity <= 1e-12 && constant <= 1e-12 && oracle <= 1e-10;
  return {ok, "partition of unity " + fmt("%.1e", unity) + " (tol 1e-12); constant " + fmt("%.1e", constant) +
                  "; 8x8->2x2 dense oracle " + fmt("%.1e", oracle) + " (tol 1e-10)"};
}

// ---------------------------------------------------------------------------
// Criteria 9 and 10 share the desk-profile training run.

struct SmokeRun {
  Verdict training;
  Verdict variation;
};

std::vector<std::uint8_t> run_to(Trainer& t, std::int64_t target, std::vector<StepStats>* history, bool* finite) {
  while (t.iteration() < target) {
    const StepStats s = t.step();
    if (!(std::isfinite(s.loss_total) && std::isfinite(s.loss_pix) && std::isfinite(s.d_loss))) *finite = false;
    if (history) history->push_back(s);
  }
  return encode_checkpoint(t.checkpoint());
}

SmokeRun smoke_training() {
  using Clock = std::chrono::steady_clock;
  TrainConfig cfg = load_run_config(std::filesystem::path(ESRGAN_SOURCE_DIR) / "configs" / "desk.ini").train;
  cfg.deterministic = true;
  cfg.total_iters = 200;
  cfg.validate();

  std::vector<TrainingPair> pairs;
  for (std::uint64_t i = 0; i < 8; ++i) {
    ImageRGB hr = synthetic_image(96, 96, 900 + i);
    pairs.push_back({"desk" + std::to_string(i), hr, degrade_x4(hr)});
  }
  const Dataset dataset(std::move(pairs));
  bool finite = true;

  // Pretraining, with a checkpoint at 100 replayed to 200.
  const auto t0 = Clock::now();
  Trainer pre(cfg, dataset);
  std::vector<StepStats> pre_log;
  run_to(pre, 100, &pre_log, &finite);
  const Checkpoint pre_mid = pre.checkpoint();
  const auto pre_final = run_to(pre, 200, &pre_log, &finite);
  const double pre_seconds = std::chrono::duration<double>(Clock::now() - t0).count();
  Trainer pre_resumed(cfg, dataset);
  pre_resumed.restore(decode_checkpoint(encode_checkpoint(pre_mid)));
  const bool pre_exact = run_to(pre_resumed, 200, nullptr, &finite) == pre_final;

  std::vector<double> l1;
  for (const auto& s : pre_log) l1.push_back(s.loss_pix);
  const double early = smoothed(l1, 10, 10);
  const double late = smoothed(l1, 200, 10);

  // GAN phase from the pretrained generator, with a checkpoint at 50 replayed to 100.
  TrainConfig gan_cfg = cfg;
  gan_cfg.phase = Phase::Gan;
  gan_cfg.total_iters = 100;
  gan_cfg.validate();
  const auto pre_bytes = encode_checkpoint(pre.checkpoint());
  const auto t1 = Clock::now();
  Trainer gan(gan_cfg, dataset);
  gan.init_generator(pre_bytes);
  run_to(gan, 50, nullptr, &finite);
  const Checkpoint gan_mid = gan.checkpoint();
  const auto gan_final = run_to(gan, 100, nullptr, &finite);
  const double gan_seconds = std::chrono::duration<double>(Clock::now() - t1).count();
  Trainer gan_resumed(gan_cfg, dataset);
  gan_resumed.restore(decode_checkpoint(encode_checkpoint(gan_mid)));
  const bool gan_exact = run_to(gan_resumed, 100, nullptr, &finite) == gan_final;

  for (const auto& p : gan.generator().parameters()) {
    for (double v : p.tensor.data()) finite = finite && std::isfinite(v);
  }

  SmokeRun out;
  out.training.pass = finite && late < early && pre_exact && gan_exact;
  out.training.detail = "desk profile (" + std::to_string(cfg.generator.num_blocks) + " blocks, nf " +
                        std::to_string(cfg.generator.num_features) + ", gc " +
                        std::to_string(cfg.generator.growth_channels) + ", crop " + std::to_string(cfg.hr_crop) +
                        ", batch " + std::to_string(cfg.batch) + ") on 8 images: losses " +
                        (finite ? "finite" : "NOT finite") + "; smoothed L1 " + fmt("%.5f", early) + " @10 -> " +
                        fmt("%.5f", late) + " @200; resume bit-exact pretrain " + (pre_exact ? "yes" : "NO") +
                        ", gan " + (gan_exact ? "yes" : "NO") + "; pretrain 200 it " + fmt("%.0f", pre_seconds) +
                        " s, gan 100 it " + fmt("%.0f", gan_seconds) + " s";

  // Stochastic variation: perturb the learned scales, then super-resolve with two seeds.
  Generator& g = gan.generator();
  double learned = 0.0;
  for (const auto& p : g.noise_scales()) {
    Tensor t = p.tensor;
    for (double& v : t.mutable_data()) {
      learned = std::max(learned, std::abs(v));
      v += 0.05;
    }
  }
  double worst_mean = 0.0;
  double min_max = INFINITY;
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    NoGradGuard no_grad;
    const Tensor lr = images_to_tensor({dataset[i].lr});
    RngState s1 = RngState(1).fork(i);
    RngState s2 = RngState(2).fork(i);
    const ImageRGB a = tensor_to_image(g.forward(lr, &s1));
    const ImageRGB b = tensor_to_image(g.forward(lr, &s2));
    double sum = 0.0;
    double mx = 0.0;
    for (std::size_t k = 0; k < a.pixels.size(); ++k) {
      const double d = std::abs(a.pixels[k] - b.pixels[k]);
      sum += d;
      mx = std::max(mx, d);
    }
    worst_mean = std::max(worst_mean, sum / static_cast<double>(a.pixels.size()));
    min_max = std::min(min_max, mx);
  }
  out.variation.pass = min_max > 0.0 && worst_mean < 0.1;
  out.variation.detail = "learned |scale| max " + fmt("%.2e", learned) + ", perturbed by +0.05; over " +
                         std::to_string(dataset.size()) + " images min of max|diff| " + fmt("%.4f", min_max) +
                         " (> 0), worst mean|diff| " + fmt("%.4f", worst_mean) + " (< 0.1 of range)";
  return out;
}

}  // namespace

int main() {
  using Clock = std::chrono::steady_clock;
  int failures = 0;
  auto report = [&](int id, const char* name, const Verdict& v, double seconds) {
    std::printf("%s criterion %d: %s | %s | %.1f s\n", v.pass ? "PASS" : "FAIL", id, name, v.detail.c_str(), seconds);
    std::fflush(stdout);
    if (!v.pass) ++failures;
  };
  auto timed = [&](int id, const char* name, const std::function<Verdict()>& fn) {
    const auto t0 = Clock::now();
    Verdict v;
    try {
      v = fn();
    } catch (const std::exception& e) {
      v = {false, std::string("exception: ") + e.what()};
    }
    report(id, name, v, std::chrono::duration<double>(Clock::now() - t0).count());
  };

  timed(1, "autodiff soundness", autodiff_soundness);
  timed(2, "parameter counts", parameter_counts);
  timed(3, "noise degeneracy", noise_degeneracy);
  timed(4, "RaGAN analytics", ragan_analytics);
  timed(5, "schedule fidelity", schedule_fidelity);
  timed(6, "loss composition", loss_composition);
  timed(7, "metrics protocol", metrics_protocol);
  timed(8, "bicubic resampling", bicubic_resampling);

  const auto t0 = Clock::now();
  SmokeRun smoke;
  try {
    smoke = smoke_training();
  } catch (const std::exception& e) {
    smoke.training = {false, std::string("exception: ") + e.what()};
    smoke.variation = {false, "smoke run did not finish"};
  }
  const double smoke_seconds = std::chrono::duration<double>(Clock::now() - t0).count();
  report(9, "end-to-end smoke training", smoke.training, smoke_seconds);
  report(10, "stochastic variation probe", smoke.variation, 0.0);

  std::printf("%d of 10 criteria passed\n", 10 - failures);
  return failures == 0 ? 0 : 1;
}

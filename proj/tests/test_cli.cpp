#include <gtest/gtest.h>

#include <cmath>
#include <fstream>
#include <sstream>

#include "esrgan/binary_io.hpp"
#include "esrgan/cli.hpp"
#include "esrgan/image.hpp"
#include "esrgan/models.hpp"
#include "esrgan/niqe.hpp"
#include "support.hpp"

using namespace esrgan;
using esrgan::testing::synthetic_image;
using esrgan::testing::TempDir;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  int code;
  std::string out;
  std::string err;
};

Outcome run_cli(const std::vector<std::string>& args) {
  std::ostringstream out;
  std::ostringstream err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

void write_text(const fs::path& path, const std::string& text) {
  fs::create_directories(path.parent_path());
  std::ofstream(path) << text;
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Snapshot of every file under `dir` with its bytes.
std::map<std::string, std::vector<std::uint8_t>> snapshot(const fs::path& dir) {
  std::map<std::string, std::vector<std::uint8_t>> out;
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (e.is_regular_file()) out[fs::relative(e.path(), dir).string()] = io::read_file(e.path());
  }
  return out;
}

std::string tiny_ini(const fs::path& data, const fs::path& out, const std::string& extra = "") {
  return "[train]\ntotal_iters = 4\nbatch = 2\nhr_crop = 16\nseed = 3\ncheckpoint_every = 2\nlog_every = 1\n" + extra +
         "\n[generator]\nnum_blocks = 1\nnum_features = 8\ngrowth_channels = 4\nnoise = on\n"
         "[discriminator]\ninput_size = 16\nbase_channels = 4\ndownsample_stages = 2\nhidden_features = 8\n"
         "[feature_extractor]\nchannels = 3, 4, 4\ntap_depth = 2\n"
         "[data]\nroot = " +
         data.string() + "\n[output]\ndir = " + out.string() + "\n";
}

fs::path tiny_weights(const fs::path& dir, bool excite) {
  GeneratorSpec spec;
  spec.num_blocks = 1;
  spec.num_features = 8;
  spec.growth_channels = 4;
  spec.noise_enabled = true;
  RngState rng(4);
  Generator g(spec, rng);
  if (excite) {
    for (const auto& p : g.noise_scales()) {
      Tensor t = p.tensor;
      std::fill(t.mutable_data().begin(), t.mutable_data().end(), 0.05);
    }
  }
  const fs::path path = dir / "g.bin";
  save_weights(g, path);
  return path;
}

void write_images(const fs::path& dir, int count, std::size_t size, std::uint64_t seed) {
  fs::create_directories(dir);
  for (int i = 0; i < count; ++i) {
    save_image(synthetic_image(size, size, seed + static_cast<std::uint64_t>(i)),
               dir / ("img_" + std::to_string(i) + ".png"));
  }
}

double mean_abs_diff(const ImageRGB& a, const ImageRGB& b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.pixels.size(); ++i) acc += std::abs(a.pixels[i] - b.pixels[i]);
  return acc / static_cast<double>(a.pixels.size());
}

}  // namespace

TEST(Cli, HelpDocumentsEveryFlag) {
  const std::map<std::string, std::vector<std::string>> flags{
      {"train", {"--phase", "--resume", "--init", "--seed", "--total-iters", "--out", "--deterministic"}},
      {"sr", {"--weights", "--input", "--output", "--seed", "--noise"}},
      {"eval", {"--sr-dir", "--hr-dir", "--niqe-model", "--ma-file", "--ma-constant", "--crop-border", "--out"}},
      {"fit-niqe", {"--pristine-dir", "--out", "--patch-size"}},
  };
  for (const auto& [command, names] : flags) {
    const Outcome r = run_cli({command, "--help"});
    EXPECT_EQ(r.code, 0) << command;
    for (const auto& f : names) EXPECT_NE(r.out.find(f), std::string::npos) << command << " " << f;
  }
  EXPECT_EQ(run_cli({"--help"}).code, 0);
}

TEST(Cli, UnknownFlagsAndMissingCommandAreFatal) {
  TempDir dir("cli");
  EXPECT_EQ(run_cli({}).code, cli::kConfigError);
  EXPECT_EQ(run_cli({"upscale"}).code, cli::kConfigError);
  EXPECT_EQ(run_cli({"eval", "--sr-dir", dir.path().string(), "--hr-dir", dir.path().string(), "--bogus"}).code,
            cli::kConfigError);
  EXPECT_EQ(run_cli({"sr", "--weights", "x", "--input", "y", "--output", "z", "--noise", "maybe"}).code,
            cli::kConfigError);
}

TEST(CliSr, ProducesX4PngAndNoiseOffIsReproducible) {
  TempDir dir("sr");
  const fs::path weights = tiny_weights(dir.path(), true);
  write_images(dir / "in", 2, 32, 40);
  const auto before = snapshot(dir / "in");

  for (const char* out : {"a", "b"}) {
    const Outcome r = run_cli({"sr", "--weights", weights.string(), "--input", (dir / "in").string(), "--output",
                               (dir / out).string(), "--noise", "off", "--seed", out[0] == 'a' ? "1" : "2"});
    ASSERT_EQ(r.code, 0) << r.err;
  }
  for (const char* name : {"img_0.png", "img_1.png"}) {
    const ImageRGB img = load_image(dir / "a" / name);
    EXPECT_EQ(img.height, 128u);
    EXPECT_EQ(img.width, 128u);
    EXPECT_EQ(io::read_file(dir / "a" / name), io::read_file(dir / "b" / name));
  }
  EXPECT_EQ(snapshot(dir / "in"), before);
}

TEST(CliSr, NoiseSeedsVaryOnlyLocalDetail) {
  TempDir dir("sr");
  const fs::path weights = tiny_weights(dir.path(), true);
  write_images(dir / "in", 1, 32, 50);
  for (const char* seed : {"1", "2"}) {
    const Outcome r = run_cli({"sr", "--weights", weights.string(), "--input", (dir / "in" / "img_0.png").string(),
                               "--output", (dir / (std::string("s") + seed)).string(), "--seed", seed});
    ASSERT_EQ(r.code, 0) << r.err;
  }
  const ImageRGB a = load_image(dir / "s1" / "img_0.png");
  const ImageRGB b = load_image(dir / "s2" / "img_0.png");
  EXPECT_GT(mean_abs_diff(a, b), 0.0);
  EXPECT_LT(mean_abs_diff(a, b), 0.1);
}

TEST(CliSr, MissingInputIsDataError) {
  TempDir dir("sr");
  const fs::path weights = tiny_weights(dir.path(), false);
  const Outcome r = run_cli({"sr", "--weights", weights.string(), "--input", (dir / "nope.png").string(), "--output",
                             (dir / "o").string()});
  EXPECT_EQ(r.code, cli::kDataError);
  EXPECT_NE(r.err.find("nope.png"), std::string::npos);
}

TEST(CliEval, IdenticalDirsGiveInfinitePsnr) {
  TempDir dir("eval");
  write_images(dir / "hr", 3, 24, 60);
  const fs::path report = dir / "report.csv";
  const Outcome r = run_cli({"eval", "--sr-dir", (dir / "hr").string(), "--hr-dir", (dir / "hr").string(), "--out",
                             report.string()});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(read_text(report),
            "filename,psnr_y,niqe,ma,perceptual_index\n"
            "img_0.png,inf,,,\n"
            "img_1.png,inf,,,\n"
            "img_2.png,inf,,,\n"
            "mean,inf,,,\n");
}

TEST(CliEval, ConstantMaTenGivesHalfNiqe) {
  TempDir dir("eval");
  write_images(dir / "hr", 2, 64, 70);
  write_images(dir / "sr", 2, 64, 80);
  write_images(dir / "pristine", 4, 64, 90);
  ASSERT_EQ(run_cli({"fit-niqe", "--pristine-dir", (dir / "pristine").string(), "--out", (dir / "m.bin").string(),
                     "--patch-size", "32"})
                .code,
            0);
  write_text(dir / "ma.csv", "filename,ma\nimg_0.png,10\nimg_1.png,10\n");
  const fs::path report = dir / "r.csv";
  const Outcome r = run_cli({"eval", "--sr-dir", (dir / "sr").string(), "--hr-dir", (dir / "hr").string(),
                             "--niqe-model", (dir / "m.bin").string(), "--ma-file", (dir / "ma.csv").string(), "--out",
                             report.string()});
  ASSERT_EQ(r.code, 0) << r.err;

  std::istringstream rows(read_text(report));
  std::string line;
  std::getline(rows, line);
  EXPECT_EQ(line, "filename,psnr_y,niqe,ma,perceptual_index");
  int count = 0;
  while (std::getline(rows, line)) {
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    ASSERT_EQ(cells.size(), 5u) << line;
    const double niqe = std::stod(cells[2]);
    EXPECT_EQ(std::stod(cells[3]), 10.0);
    EXPECT_NEAR(std::stod(cells[4]), niqe / 2.0, 1e-6) << line;
    ++count;
  }
  EXPECT_EQ(count, 3);
}

TEST(CliEval, StemMismatchListsMissingNames) {
  TempDir dir("eval");
  write_images(dir / "hr", 3, 16, 1);
  write_images(dir / "sr", 2, 16, 1);
  save_image(synthetic_image(16, 16, 9), dir / "sr" / "extra.png");
  const Outcome r = run_cli({"eval", "--sr-dir", (dir / "sr").string(), "--hr-dir", (dir / "hr").string(), "--out",
                             (dir / "r.csv").string()});
  EXPECT_EQ(r.code, cli::kDataError);
  EXPECT_NE(r.err.find("img_2"), std::string::npos);
  EXPECT_NE(r.err.find("extra"), std::string::npos);
  EXPECT_FALSE(fs::exists(dir / "r.csv"));
}

TEST(CliEval, MaWithoutNiqeModelIsConfigError) {
  TempDir dir("eval");
  write_images(dir / "hr", 1, 16, 1);
  EXPECT_EQ(run_cli({"eval", "--sr-dir", (dir / "hr").string(), "--hr-dir", (dir / "hr").string(), "--ma-constant",
                     "10", "--out", (dir / "r.csv").string()})
                .code,
            cli::kConfigError);
}

TEST(CliFitNiqe, DeterministicAndRejectsTinyCorpus) {
  TempDir dir("fit");
  write_images(dir / "p", 3, 64, 100);
  for (const char* out : {"a.bin", "b.bin"}) {
    ASSERT_EQ(
        run_cli({"fit-niqe", "--pristine-dir", (dir / "p").string(), "--out", (dir / out).string(), "--patch-size", "32"})
            .code,
        0);
  }
  EXPECT_EQ(io::read_file(dir / "a.bin"), io::read_file(dir / "b.bin"));
  EXPECT_NO_THROW(niqe::load_model(dir / "a.bin"));

  fs::create_directories(dir / "empty");
  EXPECT_EQ(run_cli({"fit-niqe", "--pristine-dir", (dir / "empty").string(), "--out", (dir / "c.bin").string()}).code,
            cli::kDataError);
  write_images(dir / "one", 1, 64, 100);
  EXPECT_EQ(run_cli({"fit-niqe", "--pristine-dir", (dir / "one").string(), "--out", (dir / "c.bin").string()}).code,
            cli::kDataError);
  EXPECT_EQ(run_cli({"fit-niqe", "--pristine-dir", (dir / "p").string(), "--out", (dir / "c.bin").string(),
                     "--patch-size", "7"})
                .code,
            cli::kConfigError);
}

TEST(CliTrain, SmokeRunWritesLayoutAndIsReproducible) {
  TempDir dir("train");
  esrgan::testing::write_dataset(dir / "data", 3, 32, 5);
  const auto data_before = snapshot(dir / "data");
  write_text(dir / "run.ini", tiny_ini(dir / "data", dir / "out"));

  const Outcome pre = run_cli({"train", (dir / "run.ini").string(), "--deterministic"});
  ASSERT_EQ(pre.code, 0) << pre.err;
  EXPECT_TRUE(fs::exists(dir / "out/checkpoints/psnr_pretrain_00000002.ckpt"));
  EXPECT_TRUE(fs::exists(dir / "out/checkpoints/psnr_pretrain_final.ckpt"));
  EXPECT_TRUE(fs::exists(dir / "out/logs/psnr_pretrain.csv"));
  EXPECT_TRUE(fs::exists(dir / "out/images/psnr_pretrain_final_img_00.png"));

  const Outcome gan = run_cli({"train", (dir / "run.ini").string(), "--phase", "gan", "--deterministic"});
  ASSERT_EQ(gan.code, 0) << gan.err;
  EXPECT_TRUE(fs::exists(dir / "out/checkpoints/gan_final.ckpt"));

  // The same command into a second directory reproduces every byte.
  const Outcome again =
      run_cli({"train", (dir / "run.ini").string(), "--deterministic", "--out", (dir / "out2").string()});
  ASSERT_EQ(again.code, 0) << again.err;
  EXPECT_EQ(io::read_file(dir / "out/checkpoints/psnr_pretrain_final.ckpt"),
            io::read_file(dir / "out2/checkpoints/psnr_pretrain_final.ckpt"));
  EXPECT_EQ(read_text(dir / "out/logs/psnr_pretrain.csv"), read_text(dir / "out2/logs/psnr_pretrain.csv"));
  EXPECT_EQ(snapshot(dir / "data"), data_before);
}

TEST(CliTrain, MissingHrDirectoryIsDataError) {
  TempDir dir("train");
  write_text(dir / "run.ini", tiny_ini(dir / "nowhere", dir / "out"));
  const Outcome r = run_cli({"train", (dir / "run.ini").string()});
  EXPECT_EQ(r.code, cli::kDataError);
  EXPECT_NE(r.err.find((dir / "nowhere").string()), std::string::npos) << r.err;
}

TEST(CliTrain, ResumeWithDifferentConfigIsConfigError) {
  TempDir dir("train");
  esrgan::testing::write_dataset(dir / "data", 3, 32, 5);
  write_text(dir / "run.ini", tiny_ini(dir / "data", dir / "out"));
  ASSERT_EQ(run_cli({"train", (dir / "run.ini").string(), "--total-iters", "2"}).code, 0);
  const std::string ckpt = (dir / "out/checkpoints/psnr_pretrain_00000002.ckpt").string();

  const Outcome other_seed = run_cli({"train", (dir / "run.ini").string(), "--resume", ckpt, "--seed", "99"});
  EXPECT_EQ(other_seed.code, cli::kConfigError);
  const Outcome same = run_cli({"train", (dir / "run.ini").string(), "--resume", ckpt});
  EXPECT_EQ(same.code, 0) << same.err;
}

TEST(CliTrain, BadConfigAndNumericalBlowUpExitCodes) {
  TempDir dir("train");
  esrgan::testing::write_dataset(dir / "data", 3, 32, 5);
  write_text(dir / "typo.ini", "[train]\nbatchsize = 2\n");
  EXPECT_EQ(run_cli({"train", (dir / "typo.ini").string()}).code, cli::kConfigError);
  EXPECT_EQ(run_cli({"train", (dir / "missing.ini").string()}).code, cli::kConfigError);

  write_text(dir / "hot.ini", tiny_ini(dir / "data", dir / "out", "base_lr = 1e200\n"));
  const Outcome r = run_cli({"train", (dir / "hot.ini").string()});
  EXPECT_EQ(r.code, cli::kNumericalError) << r.err;
  EXPECT_NE(r.err.find("non-finite"), std::string::npos);
}

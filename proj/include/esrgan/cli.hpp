#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "esrgan/metrics.hpp"

namespace esrgan::cli {

enum ExitCode : int {
  kOk = 0,
  kConfigError = 1,
  kDataError = 2,
  kNumericalError = 3,
};

struct TrainOptions {
  std::filesystem::path config;
  std::optional<std::string> phase;
  std::optional<std::filesystem::path> resume;
  std::optional<std::filesystem::path> init;
  std::optional<std::uint64_t> seed;
  std::optional<std::int64_t> total_iters;
  std::optional<std::filesystem::path> output;
  bool deterministic = false;
};

struct SrOptions {
  std::filesystem::path weights;  // weight file or checkpoint
  std::filesystem::path input;    // PNG file or directory of PNGs
  std::filesystem::path output;   // directory
  std::uint64_t seed = 0;
  bool noise = true;
};

struct EvalOptions {
  std::filesystem::path sr_dir;
  std::filesystem::path hr_dir;
  std::optional<std::filesystem::path> niqe_model;
  std::optional<std::filesystem::path> ma_file;
  std::optional<double> ma_constant;
  int crop_border = 4;
  std::filesystem::path out = "report.csv";
};

struct FitNiqeOptions {
  std::filesystem::path pristine_dir;
  std::filesystem::path out;
  int patch_size = 96;
};

// Each command reports failures on `err` and returns an ExitCode.
int cmd_train(const TrainOptions& o, std::ostream& out, std::ostream& err);
int cmd_sr(const SrOptions& o, std::ostream& out, std::ostream& err);
int cmd_eval(const EvalOptions& o, std::ostream& out, std::ostream& err);
int cmd_fit_niqe(const FitNiqeOptions& o, std::ostream& out, std::ostream& err);

/// Parses `args` (without the program name) and dispatches to a command.
/// Unknown flags and malformed values exit with kConfigError.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// Report rendering: header, one row per image, then a `mean` row.
std::string format_report(const std::vector<QualityReport>& rows);
std::string format_metric(double v);

}  // namespace esrgan::cli

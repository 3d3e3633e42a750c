#include "esrgan/cli.hpp"

#include <CLI11.hpp>
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <ostream>
#include <sstream>

#include "esrgan/binary_io.hpp"
#include "esrgan/config.hpp"
#include "esrgan/data.hpp"
#include "esrgan/errors.hpp"
#include "esrgan/image.hpp"
#include "esrgan/models.hpp"
#include "esrgan/niqe.hpp"
#include "esrgan/training.hpp"

namespace esrgan::cli {

namespace fs = std::filesystem;

namespace {

// Maps library exceptions onto exit codes.
template <typename Fn>
int guarded(std::ostream& err, Fn&& fn) {
  try {
    return fn();
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kConfigError;
  } catch (const IncompatibleError& e) {
    err << "incompatible: " << e.what() << "\n";
    return kConfigError;
  } catch (const NumericalError& e) {
    err << "numerical abort: " << e.what() << "\n";
    return kNumericalError;
  } catch (const DataError& e) {
    err << "data error: " << e.what() << "\n";
    return kDataError;
  } catch (const IntegrityError& e) {
    err << "corrupt file: " << e.what() << "\n";
    return kDataError;
  } catch (const DimensionError& e) {
    err << "data error: " << e.what() << "\n";
    return kDataError;
  } catch (const fs::filesystem_error& e) {
    err << "data error: " << e.what() << "\n";
    return kDataError;
  }
}

std::vector<std::pair<std::string, fs::path>> list_inputs(const fs::path& input) {
  if (fs::is_directory(input)) return list_pngs(input);
  if (!fs::exists(input)) throw DataError("input not found: " + input.string());
  return {{input.stem().string(), input}};
}

std::vector<std::uint8_t> generator_weight_bytes(const fs::path& path) {
  auto bytes = io::read_file(path);
  if (is_checkpoint(bytes)) return decode_checkpoint(bytes).generator_weights;
  return bytes;
}

std::map<std::string, double> read_ma_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot read ma file " + path.string());
  std::map<std::string, double> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos) throw DataError(path.string() + ":" + std::to_string(line_no) + ": expected name,ma");
    const std::string name = line.substr(0, comma);
    const std::string value = line.substr(comma + 1);
    char* end = nullptr;
    const double v = std::strtod(value.c_str(), &end);
    if (end == value.c_str()) {
      if (line_no == 1) continue;  // header
      throw DataError(path.string() + ":" + std::to_string(line_no) + ": bad ma value '" + value + "'");
    }
    out[fs::path(name).stem().string()] = v;
  }
  return out;
}

}  // namespace

std::string format_metric(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

std::string format_report(const std::vector<QualityReport>& rows) {
  std::ostringstream s;
  s << "filename,psnr_y,niqe,ma,perceptual_index\n";
  auto opt = [](const std::optional<double>& v) { return v ? format_metric(*v) : std::string(); };
  for (const auto& r : rows) {
    s << r.filename << "," << format_metric(r.psnr_y) << "," << opt(r.niqe) << "," << opt(r.ma) << ","
      << opt(r.perceptual_index) << "\n";
  }
  if (!rows.empty()) {
    auto mean_of = [&](auto get) -> std::optional<double> {
      double acc = 0.0;
      for (const auto& r : rows) {
        const std::optional<double> v = get(r);
        if (!v) return std::nullopt;
        acc += *v;
      }
      return acc / static_cast<double>(rows.size());
    };
    const auto psnr = mean_of([](const QualityReport& r) { return std::optional<double>(r.psnr_y); });
    const auto niqe = mean_of([](const QualityReport& r) { return r.niqe; });
    const auto ma = mean_of([](const QualityReport& r) { return r.ma; });
    const auto pi = mean_of([](const QualityReport& r) { return r.perceptual_index; });
    s << "mean," << opt(psnr) << "," << opt(niqe) << "," << opt(ma) << "," << opt(pi) << "\n";
  }
  return s.str();
}

int cmd_train(const TrainOptions& o, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    RunConfig rc = load_run_config(o.config);
    TrainConfig& cfg = rc.train;
    if (o.phase) cfg.phase = parse_phase(*o.phase);
    if (o.seed) cfg.seed = *o.seed;
    if (o.total_iters) cfg.total_iters = *o.total_iters;
    if (o.output) cfg.output_dir = *o.output;
    if (o.deterministic) cfg.deterministic = true;
    cfg.validate();
    if (cfg.data_root.empty()) throw ConfigError("data.root is required for training");

    const Dataset dataset(build_dataset_index(cfg.data_root));
    out << "training " << to_string(cfg.phase) << " on " << dataset.size() << " images for " << cfg.total_iters
        << " iterations\n";
    RunOptions options;
    options.resume = o.resume;
    options.init = o.init;
    options.on_step = [&](const StepStats& s) {
      if (s.iteration % cfg.log_every == 0) out << TrainLog::format_row(s) << "\n";
    };
    const RunResult result = run_training(cfg, dataset, options);
    out << "finished at iteration " << result.final_iteration << "; checkpoint " << result.final_checkpoint.string()
        << "\n";
    return static_cast<int>(kOk);
  });
}

int cmd_sr(const SrOptions& o, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const auto weights = generator_weight_bytes(o.weights);
    const GeneratorSpec spec = peek_generator_spec(weights);
    RngState init_rng(0);
    Generator g(spec, init_rng);
    decode_weights(g, weights);

    const auto inputs = list_inputs(o.input);
    if (inputs.empty()) throw DataError("no PNG inputs in " + o.input.string());
    fs::create_directories(o.output);
    for (const auto& [stem, path] : inputs) {
      const ImageRGB lr = load_image(path);
      Tensor sr;
      {
        NoGradGuard no_grad;
        RngState noise = RngState(o.seed).fork(io::fnv1a(stem));
        sr = g.forward(images_to_tensor({lr}), o.noise ? &noise : nullptr);
      }
      check_finite(sr, "super-resolved " + stem);
      const fs::path dest = o.output / (stem + ".png");
      save_image(tensor_to_image(sr), dest);
      out << path.string() << " -> " << dest.string() << "\n";
    }
    return static_cast<int>(kOk);
  });
}

int cmd_eval(const EvalOptions& o, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    if (o.crop_border < 0) throw ConfigError("--crop-border must be >= 0");
    if (o.ma_file && o.ma_constant) throw ConfigError("--ma-file and --ma-constant are mutually exclusive");
    const bool have_ma = o.ma_file || o.ma_constant;
    if (have_ma && !o.niqe_model) throw ConfigError("the perceptual index needs --niqe-model alongside Ma scores");

    const auto sr = list_pngs(o.sr_dir);
    const auto hr = list_pngs(o.hr_dir);
    std::vector<std::string> only_sr;
    std::vector<std::string> only_hr;
    std::map<std::string, fs::path> hr_by_stem(hr.begin(), hr.end());
    std::map<std::string, fs::path> sr_by_stem(sr.begin(), sr.end());
    for (const auto& [stem, _] : sr) {
      if (!hr_by_stem.count(stem)) only_sr.push_back(stem);
    }
    for (const auto& [stem, _] : hr) {
      if (!sr_by_stem.count(stem)) only_hr.push_back(stem);
    }
    if (!only_sr.empty() || !only_hr.empty()) {
      std::string msg = "filename stems differ between directories;";
      if (!only_hr.empty()) {
        msg += " missing from sr-dir:";
        for (const auto& s : only_hr) msg += " " + s;
        msg += ";";
      }
      if (!only_sr.empty()) {
        msg += " missing from hr-dir:";
        for (const auto& s : only_sr) msg += " " + s;
      }
      throw DataError(msg);
    }
    if (sr.empty()) throw DataError("no PNG images in " + o.sr_dir.string());

    std::optional<niqe::NiqeModel> model;
    if (o.niqe_model) model = niqe::load_model(*o.niqe_model);
    std::map<std::string, double> ma_values;
    if (o.ma_file) ma_values = read_ma_file(*o.ma_file);

    std::vector<QualityReport> rows;
    for (const auto& [stem, sr_path] : sr) {
      const ImageRGB sr_img = load_image(sr_path);
      const ImageRGB hr_img = load_image(hr_by_stem.at(stem));
      QualityReport r;
      r.filename = sr_path.filename().string();
      r.psnr_y = psnr_y(sr_img, hr_img, o.crop_border);
      if (model) r.niqe = niqe::niqe_score(sr_img, *model);
      if (o.ma_constant) r.ma = *o.ma_constant;
      if (o.ma_file) {
        auto it = ma_values.find(stem);
        if (it == ma_values.end()) throw DataError("ma file has no entry for " + stem);
        r.ma = it->second;
      }
      finalize_report(r);
      rows.push_back(std::move(r));
    }
    const std::string report = format_report(rows);
    if (o.out.has_parent_path()) fs::create_directories(o.out.parent_path());
    const std::vector<std::uint8_t> bytes(report.begin(), report.end());
    io::write_file_atomic(o.out, bytes);
    out << report;
    return static_cast<int>(kOk);
  });
}

int cmd_fit_niqe(const FitNiqeOptions& o, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const auto files = list_pngs(o.pristine_dir);
    if (files.size() < 2) {
      throw DataError("NIQE fitting needs at least 2 images in " + o.pristine_dir.string() + ", found " +
                      std::to_string(files.size()));
    }
    std::vector<ImageRGB> corpus;
    for (const auto& [stem, path] : files) corpus.push_back(load_image(path));
    niqe::NiqeModel model;
    try {
      model = niqe::fit_pristine_model(corpus, o.patch_size);
    } catch (const std::invalid_argument& e) {
      if (dynamic_cast<const DimensionError*>(&e)) throw;
      throw ConfigError(e.what());
    }
    model.corpus_id = o.pristine_dir.string();
    niqe::save_model(model, o.out);
    out << "fitted NIQE model on " << corpus.size() << " images -> " << o.out.string() << "\n";
    return static_cast<int>(kOk);
  });
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"x4 super-resolution: training, inference and evaluation", "esrgan"};
  app.require_subcommand(1);

  TrainOptions train;
  auto* train_cmd = app.add_subcommand("train", "Run the PSNR pretraining or GAN phase");
  train_cmd->add_option("config", train.config, "INI run configuration")->required()->check(CLI::ExistingFile);
  train_cmd->add_option("--phase", train.phase, "Override [train] phase")
      ->check(CLI::IsMember({"psnr_pretrain", "pretrain", "gan"}));
  train_cmd->add_option("--resume", train.resume, "Checkpoint of this phase to continue from");
  train_cmd->add_option("--init", train.init,
                        "GAN phase: generator weights or checkpoint to start from "
                        "(default <out>/checkpoints/psnr_pretrain_final.ckpt)");
  train_cmd->add_option("--seed", train.seed, "Override [train] seed");
  train_cmd->add_option("--total-iters", train.total_iters, "Override [train] total_iters");
  train_cmd->add_option("--out", train.output, "Override [output] dir");
  train_cmd->add_flag("--deterministic", train.deterministic, "Record zero wall time so reruns are byte-identical");

  SrOptions sr;
  std::string noise = "on";
  auto* sr_cmd = app.add_subcommand("sr", "Super-resolve PNG images by x4");
  sr_cmd->add_option("--weights", sr.weights, "Generator weight file or training checkpoint")
      ->required()
      ->check(CLI::ExistingFile);
  sr_cmd->add_option("--input", sr.input, "PNG file or directory of PNGs")->required();
  sr_cmd->add_option("--output", sr.output, "Output directory")->required();
  sr_cmd->add_option("--seed", sr.seed, "Noise seed")->capture_default_str();
  sr_cmd->add_option("--noise", noise, "Noise injection at inference")
      ->check(CLI::IsMember({"on", "off"}))
      ->capture_default_str();

  EvalOptions ev;
  auto* eval_cmd = app.add_subcommand("eval", "Score SR images against HR references");
  eval_cmd->add_option("--sr-dir", ev.sr_dir, "Super-resolved PNGs")->required();
  eval_cmd->add_option("--hr-dir", ev.hr_dir, "Reference PNGs with matching stems")->required();
  eval_cmd->add_option("--niqe-model", ev.niqe_model, "Model from fit-niqe; enables the niqe column");
  auto* ma_file = eval_cmd->add_option("--ma-file", ev.ma_file, "CSV of filename,ma");
  auto* ma_const = eval_cmd->add_option("--ma-constant", ev.ma_constant, "Ma score applied to every image");
  ma_file->excludes(ma_const);
  eval_cmd->add_option("--crop-border", ev.crop_border, "Pixels removed on each side for PSNR")
      ->capture_default_str();
  eval_cmd->add_option("--out", ev.out, "Report CSV path")->capture_default_str();

  FitNiqeOptions fit;
  auto* fit_cmd = app.add_subcommand("fit-niqe", "Fit a NIQE model to a pristine image corpus");
  fit_cmd->add_option("--pristine-dir", fit.pristine_dir, "Directory of pristine PNGs")->required();
  fit_cmd->add_option("--out", fit.out, "Model file to write")->required();
  fit_cmd->add_option("--patch-size", fit.patch_size, "Patch side in pixels (even, >= 20)")->capture_default_str();

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return kConfigError;
  }

  if (*train_cmd) return cmd_train(train, out, err);
  if (*sr_cmd) {
    sr.noise = noise == "on";
    return cmd_sr(sr, out, err);
  }
  if (*eval_cmd) return cmd_eval(ev, out, err);
  return cmd_fit_niqe(fit, out, err);
}

}  // namespace esrgan::cli

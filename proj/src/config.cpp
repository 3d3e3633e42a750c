#include "esrgan/config.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <charconv>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "esrgan/errors.hpp"

namespace esrgan {

namespace {

using Setter = std::function<void(const std::string&)>;
using SectionTable = std::map<std::string, std::map<std::string, Setter>>;

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

template <typename Int>
Int parse_int(const std::string& raw) {
  const std::string s = trim(raw);
  Int value{};
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (ec != std::errc{} || ptr != s.data() + s.size() || s.empty()) throw std::invalid_argument("not an integer");
  return value;
}

double parse_real(const std::string& raw) {
  const std::string s = trim(raw);
  std::size_t used = 0;
  const double v = std::stod(s, &used);
  if (used != s.size()) throw std::invalid_argument("trailing characters");
  return v;
}

bool parse_bool(const std::string& raw) {
  const std::string s = trim(raw);
  if (s == "true" || s == "on" || s == "yes" || s == "1") return true;
  if (s == "false" || s == "off" || s == "no" || s == "0") return false;
  throw std::invalid_argument("not a boolean");
}

template <typename Int>
std::vector<Int> parse_int_list(const std::string& raw) {
  std::vector<Int> out;
  std::stringstream ss(raw);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (trim(item).empty()) continue;
    out.push_back(parse_int<Int>(item));
  }
  return out;
}

SectionTable make_table(RunConfig& rc) {
  TrainConfig& t = rc.train;
  auto int_field = [](int& f) { return [&f](const std::string& v) { f = parse_int<int>(v); }; };
  auto i64_field = [](std::int64_t& f) { return [&f](const std::string& v) { f = parse_int<std::int64_t>(v); }; };
  auto real_field = [](double& f) { return [&f](const std::string& v) { f = parse_real(v); }; };
  auto bool_field = [](bool& f) { return [&f](const std::string& v) { f = parse_bool(v); }; };
  auto path_field = [](std::filesystem::path& f) { return [&f](const std::string& v) { f = trim(v); }; };

  SectionTable table;
  table["train"] = {
      {"phase", [&t](const std::string& v) { t.phase = parse_phase(trim(v)); }},
      {"total_iters", i64_field(t.total_iters)},
      {"base_lr", real_field(t.base_lr)},
      {"milestones", [&t](const std::string& v) { t.milestones = parse_int_list<std::int64_t>(v); }},
      {"schedule_in_pretrain", bool_field(t.schedule_in_pretrain)},
      {"batch", int_field(t.batch)},
      {"hr_crop", int_field(t.hr_crop)},
      {"seed", [&t](const std::string& v) { t.seed = parse_int<std::uint64_t>(v); }},
      {"checkpoint_every", i64_field(t.checkpoint_every)},
      {"log_every", i64_field(t.log_every)},
      {"deterministic", bool_field(t.deterministic)},
  };
  table["generator"] = {
      {"num_blocks", int_field(t.generator.num_blocks)},
      {"num_features", int_field(t.generator.num_features)},
      {"growth_channels", int_field(t.generator.growth_channels)},
      {"dense_layers", int_field(t.generator.dense_layers)},
      {"scale", int_field(t.generator.scale)},
      {"variant", [&t](const std::string& v) { t.generator.variant = parse_block_variant(trim(v)); }},
      {"noise", bool_field(t.generator.noise_enabled)},
      {"noise_after_rrdb", bool_field(t.generator.noise_after_rrdb)},
      {"residual_scaling", real_field(t.generator.residual_scaling)},
  };
  table["discriminator"] = {
      {"input_size", int_field(t.discriminator.input_size)},
      {"base_channels", int_field(t.discriminator.base_channels)},
      {"downsample_stages", int_field(t.discriminator.num_downsample_stages)},
      {"batchnorm", bool_field(t.discriminator.use_batchnorm)},
      {"hidden_features", int_field(t.discriminator.hidden_features)},
  };
  table["loss"] = {
      {"perceptual_weight", real_field(t.loss.perceptual)},
      {"adversarial_weight", real_field(t.loss.adversarial)},
      {"pixel_weight", real_field(t.loss.pixel)},
  };
  table["feature_extractor"] = {
      {"channels", [&t](const std::string& v) { t.feature_extractor.channels = parse_int_list<int>(v); }},
      {"tap_depth", int_field(t.feature_extractor.tap_depth)},
      {"seed", [&t](const std::string& v) { t.feature_extractor.seed = parse_int<std::uint64_t>(v); }},
  };
  table["adam"] = {
      {"beta1", real_field(t.adam.beta1)},
      {"beta2", real_field(t.adam.beta2)},
      {"eps", real_field(t.adam.eps)},
  };
  table["augment"] = {
      {"hflip", bool_field(t.augment.horizontal_flip)},
      {"rotations", [&t](const std::string& v) { t.augment.rotations = parse_int_list<int>(v); }},
  };
  table["data"] = {{"root", path_field(t.data_root)}};
  table["output"] = {{"dir", path_field(t.output_dir)}};
  table["eval"] = {
      {"crop_border", int_field(rc.crop_border)},
      {"niqe_patch_size", int_field(rc.niqe_patch_size)},
  };
  return table;
}

}  // namespace

RunConfig parse_run_config(const std::string& text, const std::string& source) {
  namespace pt = boost::property_tree;
  pt::ptree tree;
  try {
    std::istringstream in(text);
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError(source + ": line " + std::to_string(e.line()) + ": " + e.message());
  }

  RunConfig rc;
  const SectionTable table = make_table(rc);
  for (const auto& [section, body] : tree) {
    if (body.empty() && !body.data().empty()) throw ConfigError(source + ": key '" + section + "' must be inside a [section]");
    auto sec = table.find(section);
    if (sec == table.end()) throw ConfigError(source + ": unknown section [" + section + "]");
    for (const auto& [key, node] : body) {
      auto setter = sec->second.find(key);
      if (setter == sec->second.end()) throw ConfigError(source + ": unknown key '" + key + "' in [" + section + "]");
      const std::string value = node.get_value<std::string>();
      try {
        setter->second(value);
      } catch (const ConfigError&) {
        throw;
      } catch (const std::exception& e) {
        throw ConfigError(source + ": bad value '" + value + "' for " + section + "." + key + " (" + e.what() + ")");
      }
    }
  }
  if (rc.crop_border < 0) throw ConfigError(source + ": eval.crop_border must be >= 0");
  return rc;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_run_config(ss.str(), path.string());
}

}  // namespace esrgan

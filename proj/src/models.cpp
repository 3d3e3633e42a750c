#include "esrgan/models.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>
#include <unordered_set>

#include "esrgan/binary_io.hpp"
#include "esrgan/errors.hpp"
#include "esrgan/ops.hpp"

namespace esrgan {

namespace {

constexpr std::string_view kWeightsMagic = "ESRW";
constexpr std::uint32_t kWeightsVersion = 1;
constexpr std::uint8_t kKindGenerator = 0;
constexpr std::uint8_t kKindDiscriminator = 1;

std::string param_name(const std::string& prefix, const char* leaf) { return prefix + "." + leaf; }

void check_unique(const std::vector<Parameter>& params) {
  std::unordered_set<std::string> seen;
  for (const auto& p : params) {
    if (!seen.insert(p.name).second) throw ConfigError("duplicate parameter name " + p.name);
  }
}

}  // namespace

std::string_view to_string(BlockVariant v) {
  switch (v) {
    case BlockVariant::DenseBlock:
      return "rrdb";
    case BlockVariant::ResidualDenseBlock:
      return "rrdrb";
  }
  return "unknown";
}

BlockVariant parse_block_variant(std::string_view text) {
  if (text == "rrdb" || text == "dense") return BlockVariant::DenseBlock;
  if (text == "rrdrb" || text == "residual_dense") return BlockVariant::ResidualDenseBlock;
  throw ConfigError("unknown block variant '" + std::string(text) + "' (expected rrdb or rrdrb)");
}

void GeneratorSpec::validate() const {
  if (num_blocks < 1) throw ConfigError("generator.num_blocks must be >= 1");
  if (num_features < 1) throw ConfigError("generator.num_features must be >= 1");
  if (growth_channels < 1) throw ConfigError("generator.growth_channels must be >= 1");
  if (dense_layers < 2) throw ConfigError("generator.dense_layers must be >= 2");
  if (scale != 4) throw ConfigError("generator.scale must be 4");
  if (!(residual_scaling > 0.0 && residual_scaling <= 1.0)) {
    throw ConfigError("generator.residual_scaling must be in (0, 1]");
  }
  if (noise_after_rrdb && !noise_enabled) throw ConfigError("generator.noise_after_rrdb requires noise");
}

void DiscriminatorSpec::validate() const {
  if (input_size < 1) throw ConfigError("discriminator.input_size must be >= 1");
  if (base_channels < 1) throw ConfigError("discriminator.base_channels must be >= 1");
  if (num_downsample_stages < 1) throw ConfigError("discriminator.num_downsample_stages must be >= 1");
  if (hidden_features < 1) throw ConfigError("discriminator.hidden_features must be >= 1");
  const int factor = 1 << num_downsample_stages;
  if (input_size % factor != 0) {
    throw ConfigError("discriminator.input_size " + std::to_string(input_size) + " is not divisible by 2^" +
                      std::to_string(num_downsample_stages));
  }
}

Tensor ConvLayer::forward(const Tensor& x) const { return ops::conv2d(x, weight, bias, stride, padding); }

ConvLayer make_conv(int in_channels, int out_channels, int kernel, int stride, RngState& rng, double gain,
                    bool requires_grad) {
  const Shape ws{static_cast<std::size_t>(out_channels), static_cast<std::size_t>(in_channels),
                 static_cast<std::size_t>(kernel), static_cast<std::size_t>(kernel)};
  const double fan_in = static_cast<double>(in_channels * kernel * kernel);
  const double std_dev = std::sqrt(2.0 / fan_in) * gain;
  Tensor w = normal_sample(rng, ws);
  for (double& v : w.mutable_data()) v *= std_dev;
  w.set_requires_grad(requires_grad);
  ConvLayer conv;
  conv.weight = w;
  conv.bias = Tensor::zeros(Shape{1, static_cast<std::size_t>(out_channels), 1, 1}, requires_grad);
  conv.stride = stride;
  conv.padding = kernel / 2;
  return conv;
}

Tensor dense_block_forward(const Tensor& x, BlockVariant variant, const DenseBlockParams& params, double beta) {
  const auto& convs = params.convs;
  if (convs.size() < 2) throw DimensionError("dense block needs at least two layers");
  if (x.shape().c != convs.front().weight.shape().c) {
    throw DimensionError("dense block expects " + std::to_string(convs.front().weight.shape().c) +
                         " channels, got " + std::to_string(x.shape().c));
  }
  std::vector<Tensor> features{x};
  std::vector<Tensor> outputs;
  for (std::size_t i = 0; i + 1 < convs.size(); ++i) {
    Tensor in = features.size() == 1 ? x : ops::concat_channels(features);
    Tensor y = ops::leaky_relu(convs[i].forward(in), kLeakySlope);
    if (variant == BlockVariant::ResidualDenseBlock && i >= 2) y = ops::add(y, outputs[i - 2]);
    outputs.push_back(y);
    features.push_back(y);
  }
  Tensor last = convs.back().forward(ops::concat_channels(features));
  return ops::add(x, ops::scale(last, beta));
}

Tensor inject_noise(const Tensor& features, const Tensor& scales, RngState& rng) {
  const Shape s = features.shape();
  Tensor noise = normal_sample(rng, Shape{s.n, 1, s.h, s.w});
  return ops::add_channel_scaled(features, scales, noise);
}

Tensor rrdb_forward(const Tensor& x, BlockVariant variant, const RrdbParams& params, double beta,
                    RngState* noise_rng) {
  Tensor out = x;
  for (int j = 0; j < kInnerBlocksPerRrdb; ++j) {
    out = dense_block_forward(out, variant, params.inner[j], beta);
    if (noise_rng && params.noise_scales[j].defined()) out = inject_noise(out, params.noise_scales[j], *noise_rng);
  }
  Tensor result = ops::add(x, ops::scale(out, beta));
  if (noise_rng && params.outer_noise_scale.defined()) {
    result = inject_noise(result, params.outer_noise_scale, *noise_rng);
  }
  return result;
}

Generator::Generator(GeneratorSpec spec, RngState& init_rng) : spec_(spec) {
  spec_.validate();
  const int nf = spec_.num_features;
  const int gc = spec_.growth_channels;
  const int layers = spec_.dense_layers;
  constexpr double kDenseGain = 0.1;

  head_ = make_conv(3, nf, 3, 1, init_rng);
  register_conv("head", head_);
  blocks_.resize(static_cast<std::size_t>(spec_.num_blocks));
  for (std::size_t b = 0; b < blocks_.size(); ++b) {
    auto& block = blocks_[b];
    const std::string block_name = "blocks." + std::to_string(b);
    for (int j = 0; j < kInnerBlocksPerRrdb; ++j) {
      const std::string inner_name = block_name + ".rdb" + std::to_string(j);
      auto& convs = block.inner[j].convs;
      for (int i = 0; i < layers; ++i) {
        const int out = (i + 1 == layers) ? nf : gc;
        convs.push_back(make_conv(nf + i * gc, out, 3, 1, init_rng, kDenseGain));
        register_conv(inner_name + ".conv" + std::to_string(i), convs.back());
      }
      if (spec_.noise_enabled) {
        block.noise_scales[j] = Tensor::zeros(Shape{1, static_cast<std::size_t>(nf), 1, 1}, true);
        params_.push_back({inner_name + ".noise_scale", block.noise_scales[j]});
      }
    }
    if (spec_.noise_after_rrdb) {
      block.outer_noise_scale = Tensor::zeros(Shape{1, static_cast<std::size_t>(nf), 1, 1}, true);
      params_.push_back({block_name + ".noise_scale", block.outer_noise_scale});
    }
  }
  trunk_ = make_conv(nf, nf, 3, 1, init_rng);
  register_conv("trunk", trunk_);
  upconv1_ = make_conv(nf, nf, 3, 1, init_rng);
  register_conv("upconv1", upconv1_);
  upconv2_ = make_conv(nf, nf, 3, 1, init_rng);
  register_conv("upconv2", upconv2_);
  hr_conv_ = make_conv(nf, nf, 3, 1, init_rng);
  register_conv("hr_conv", hr_conv_);
  last_ = make_conv(nf, 3, 3, 1, init_rng, kDenseGain);
  register_conv("last", last_);
  check_unique(params_);
}

void Generator::register_conv(const std::string& name, const ConvLayer& conv) {
  params_.push_back({param_name(name, "weight"), conv.weight});
  params_.push_back({param_name(name, "bias"), conv.bias});
}

Tensor Generator::forward(const Tensor& lr, RngState* noise_rng) const {
  const Shape& s = lr.shape();
  if (s.c != 3) throw DimensionError("generator expects 3-channel input, got " + s.str());
  RngState* rng = spec_.noise_enabled ? noise_rng : nullptr;
  const double beta = spec_.residual_scaling;

  Tensor fea = head_.forward(lr);
  Tensor trunk = fea;
  for (const auto& block : blocks_) trunk = rrdb_forward(trunk, spec_.variant, block, beta, rng);
  fea = ops::add(fea, trunk_.forward(trunk));
  fea = ops::leaky_relu(upconv1_.forward(ops::upsample_nearest(fea, 2)), kLeakySlope);
  fea = ops::leaky_relu(upconv2_.forward(ops::upsample_nearest(fea, 2)), kLeakySlope);
  return last_.forward(ops::leaky_relu(hr_conv_.forward(fea), kLeakySlope));
}

std::vector<Parameter> Generator::noise_scales() const {
  std::vector<Parameter> out;
  std::copy_if(params_.begin(), params_.end(), std::back_inserter(out),
               [](const Parameter& p) { return p.name.ends_with("noise_scale"); });
  return out;
}

Generator build_generator(const GeneratorSpec& spec, RngState& rng) { return Generator(spec, rng); }

Discriminator::Discriminator(DiscriminatorSpec spec, RngState& init_rng) : spec_(spec) {
  spec_.validate();
  const int base = spec_.base_channels;
  auto add_layer = [&](int in, int out, int stride, bool norm) {
    Layer layer;
    layer.conv = make_conv(in, out, 3, stride, init_rng);
    const std::string name = "features." + std::to_string(layers_.size());
    params_.push_back({name + ".weight", layer.conv.weight});
    params_.push_back({name + ".bias", layer.conv.bias});
    if (norm) {
      layer.gamma = Tensor::full(Shape{1, static_cast<std::size_t>(out), 1, 1}, 1.0, true);
      layer.beta = Tensor::zeros(Shape{1, static_cast<std::size_t>(out), 1, 1}, true);
      params_.push_back({name + ".bn_gamma", layer.gamma});
      params_.push_back({name + ".bn_beta", layer.beta});
    }
    layers_.push_back(std::move(layer));
  };

  const bool bn = spec_.use_batchnorm;
  add_layer(3, base, 1, false);
  int channels = base;
  for (int stage = 0; stage < spec_.num_downsample_stages; ++stage) {
    const int out = base << std::min(stage, 3);
    if (stage > 0) add_layer(channels, out, 1, bn);
    add_layer(out, out, 2, bn);
    channels = out;
  }
  const int side = spec_.input_size >> spec_.num_downsample_stages;
  fc1_ = make_conv(channels * side * side, spec_.hidden_features, 1, 1, init_rng);
  fc2_ = make_conv(spec_.hidden_features, 1, 1, 1, init_rng);
  params_.push_back({"fc1.weight", fc1_.weight});
  params_.push_back({"fc1.bias", fc1_.bias});
  params_.push_back({"fc2.weight", fc2_.weight});
  params_.push_back({"fc2.bias", fc2_.bias});
  check_unique(params_);
}

Tensor Discriminator::forward(const Tensor& image) const {
  const Shape& s = image.shape();
  const auto size = static_cast<std::size_t>(spec_.input_size);
  if (s.c != 3 || s.h != size || s.w != size) {
    throw DimensionError("discriminator expects (n,3," + std::to_string(size) + "," + std::to_string(size) +
                         "), got " + s.str());
  }
  Tensor x = image;
  for (const auto& layer : layers_) {
    x = layer.conv.forward(x);
    if (layer.gamma.defined()) x = ops::batch_norm(x, layer.gamma, layer.beta);
    x = ops::leaky_relu(x, kLeakySlope);
  }
  const Shape fs = x.shape();
  x = ops::reshape(x, Shape{fs.n, fs.c * fs.h * fs.w, 1, 1});
  x = ops::leaky_relu(fc1_.forward(x), kLeakySlope);
  return fc2_.forward(x);
}

std::size_t param_count(const std::vector<Parameter>& params) {
  std::size_t total = 0;
  for (const auto& p : params) total += p.tensor.numel();
  return total;
}

namespace {

void write_records(io::ByteWriter& w, const std::vector<Parameter>& params) {
  w.u32(static_cast<std::uint32_t>(params.size()));
  for (const auto& p : params) {
    w.str(p.name);
    const Shape& s = p.tensor.shape();
    w.u64(s.n);
    w.u64(s.c);
    w.u64(s.h);
    w.u64(s.w);
    w.f64s(p.tensor.data());
  }
}

void read_records(io::ByteReader& r, const std::vector<Parameter>& params) {
  const std::uint32_t count = r.u32();
  if (count != params.size()) {
    throw IncompatibleError("weight file has " + std::to_string(count) + " parameters, model has " +
                            std::to_string(params.size()));
  }
  // Decode everything first so a failure leaves the model untouched.
  std::vector<std::vector<double>> values(params.size());
  for (std::size_t i = 0; i < params.size(); ++i) {
    const std::string name = r.str();
    Shape s;
    s.n = r.u64();
    s.c = r.u64();
    s.h = r.u64();
    s.w = r.u64();
    if (name != params[i].name || s != params[i].tensor.shape()) {
      throw IncompatibleError("weight record " + name + " " + s.str() + " does not match model parameter " +
                              params[i].name + " " + params[i].tensor.shape().str());
    }
    values[i] = r.f64s(s.numel());
  }
  r.expect_done();
  for (std::size_t i = 0; i < params.size(); ++i) {
    Tensor t = params[i].tensor;
    std::copy(values[i].begin(), values[i].end(), t.mutable_data().begin());
  }
}

void write_spec(io::ByteWriter& w, const GeneratorSpec& s) {
  w.u32(static_cast<std::uint32_t>(s.num_blocks));
  w.u32(static_cast<std::uint32_t>(s.num_features));
  w.u32(static_cast<std::uint32_t>(s.growth_channels));
  w.u32(static_cast<std::uint32_t>(s.dense_layers));
  w.u32(static_cast<std::uint32_t>(s.scale));
  w.u8(static_cast<std::uint8_t>(s.variant));
  w.u8(s.noise_enabled ? 1 : 0);
  w.f64(s.residual_scaling);
  w.u8(s.noise_after_rrdb ? 1 : 0);
}

GeneratorSpec read_generator_spec(io::ByteReader& r) {
  GeneratorSpec s;
  s.num_blocks = static_cast<int>(r.u32());
  s.num_features = static_cast<int>(r.u32());
  s.growth_channels = static_cast<int>(r.u32());
  s.dense_layers = static_cast<int>(r.u32());
  s.scale = static_cast<int>(r.u32());
  const std::uint8_t variant = r.u8();
  if (variant > 1) throw IntegrityError("weight file: unknown block variant");
  s.variant = static_cast<BlockVariant>(variant);
  s.noise_enabled = r.u8() != 0;
  s.residual_scaling = r.f64();
  s.noise_after_rrdb = r.u8() != 0;
  return s;
}

void write_spec(io::ByteWriter& w, const DiscriminatorSpec& s) {
  w.u32(static_cast<std::uint32_t>(s.input_size));
  w.u32(static_cast<std::uint32_t>(s.base_channels));
  w.u32(static_cast<std::uint32_t>(s.num_downsample_stages));
  w.u8(s.use_batchnorm ? 1 : 0);
  w.u32(static_cast<std::uint32_t>(s.hidden_features));
}

DiscriminatorSpec read_discriminator_spec(io::ByteReader& r) {
  DiscriminatorSpec s;
  s.input_size = static_cast<int>(r.u32());
  s.base_channels = static_cast<int>(r.u32());
  s.num_downsample_stages = static_cast<int>(r.u32());
  s.use_batchnorm = r.u8() != 0;
  s.hidden_features = static_cast<int>(r.u32());
  return s;
}

template <typename T>
void diff_field(std::vector<std::string>& out, const char* name, const T& file, const T& model) {
  if (file != model) {
    std::ostringstream os;
    os << name << " (file " << file << ", model " << model << ")";
    out.push_back(os.str());
  }
}

std::vector<std::string> spec_diff(const GeneratorSpec& f, const GeneratorSpec& m) {
  std::vector<std::string> d;
  diff_field(d, "num_blocks", f.num_blocks, m.num_blocks);
  diff_field(d, "num_features", f.num_features, m.num_features);
  diff_field(d, "growth_channels", f.growth_channels, m.growth_channels);
  diff_field(d, "dense_layers", f.dense_layers, m.dense_layers);
  diff_field(d, "scale", f.scale, m.scale);
  diff_field(d, "variant", std::string(to_string(f.variant)), std::string(to_string(m.variant)));
  diff_field(d, "noise_enabled", f.noise_enabled, m.noise_enabled);
  diff_field(d, "residual_scaling", f.residual_scaling, m.residual_scaling);
  diff_field(d, "noise_after_rrdb", f.noise_after_rrdb, m.noise_after_rrdb);
  return d;
}

std::vector<std::string> spec_diff(const DiscriminatorSpec& f, const DiscriminatorSpec& m) {
  std::vector<std::string> d;
  diff_field(d, "input_size", f.input_size, m.input_size);
  diff_field(d, "base_channels", f.base_channels, m.base_channels);
  diff_field(d, "num_downsample_stages", f.num_downsample_stages, m.num_downsample_stages);
  diff_field(d, "use_batchnorm", f.use_batchnorm, m.use_batchnorm);
  diff_field(d, "hidden_features", f.hidden_features, m.hidden_features);
  return d;
}

std::string join(const std::vector<std::string>& parts) {
  std::string out;
  for (const auto& p : parts) out += (out.empty() ? "" : ", ") + p;
  return out;
}

io::ByteReader open_weights(std::span<const std::uint8_t> bytes, std::uint8_t expected_kind) {
  auto payload = io::verify_sealed(bytes, "weight file");
  io::ByteReader r(payload, "weight file");
  r.expect_magic(kWeightsMagic);
  const std::uint32_t version = r.u32();
  if (version != kWeightsVersion) throw IntegrityError("weight file: unsupported version " + std::to_string(version));
  const std::uint8_t kind = r.u8();
  if (kind != expected_kind) {
    throw IncompatibleError(std::string("weight file holds a ") +
                            (kind == kKindGenerator ? "generator" : "discriminator") + ", expected a " +
                            (expected_kind == kKindGenerator ? "generator" : "discriminator"));
  }
  return r;
}

void write_header(io::ByteWriter& w, std::uint8_t kind) {
  w.raw({reinterpret_cast<const std::uint8_t*>(kWeightsMagic.data()), kWeightsMagic.size()});
  w.u32(kWeightsVersion);
  w.u8(kind);
}

}  // namespace

std::vector<std::uint8_t> encode_weights(const Generator& g) {
  io::ByteWriter w;
  write_header(w, kKindGenerator);
  write_spec(w, g.spec());
  write_records(w, g.parameters());
  w.seal();
  return w.take();
}

std::vector<std::uint8_t> encode_weights(const Discriminator& d) {
  io::ByteWriter w;
  write_header(w, kKindDiscriminator);
  write_spec(w, d.spec());
  write_records(w, d.parameters());
  w.seal();
  return w.take();
}

GeneratorSpec peek_generator_spec(std::span<const std::uint8_t> bytes) {
  auto r = open_weights(bytes, kKindGenerator);
  return read_generator_spec(r);
}

void decode_weights(Generator& g, std::span<const std::uint8_t> bytes) {
  auto r = open_weights(bytes, kKindGenerator);
  const auto diff = spec_diff(read_generator_spec(r), g.spec());
  if (!diff.empty()) throw IncompatibleError("generator spec mismatch: " + join(diff));
  read_records(r, g.parameters());
}

void decode_weights(Discriminator& d, std::span<const std::uint8_t> bytes) {
  auto r = open_weights(bytes, kKindDiscriminator);
  const auto diff = spec_diff(read_discriminator_spec(r), d.spec());
  if (!diff.empty()) throw IncompatibleError("discriminator spec mismatch: " + join(diff));
  read_records(r, d.parameters());
}

void save_weights(const Generator& g, const std::filesystem::path& path) {
  io::write_file_atomic(path, encode_weights(g));
}

void save_weights(const Discriminator& d, const std::filesystem::path& path) {
  io::write_file_atomic(path, encode_weights(d));
}

void load_weights(Generator& g, const std::filesystem::path& path) { decode_weights(g, io::read_file(path)); }

void load_weights(Discriminator& d, const std::filesystem::path& path) { decode_weights(d, io::read_file(path)); }

std::size_t transplant_parameters(const std::vector<Parameter>& src, const std::vector<Parameter>& dst) {
  std::map<std::string, const Tensor*> by_name;
  for (const auto& p : src) by_name[p.name] = &p.tensor;
  std::size_t copied = 0;
  for (const auto& p : dst) {
    auto it = by_name.find(p.name);
    if (it == by_name.end()) continue;
    if (it->second->shape() != p.tensor.shape()) {
      throw IncompatibleError("cannot transplant " + p.name + ": shape " + it->second->shape().str() + " vs " +
                              p.tensor.shape().str());
    }
    Tensor t = p.tensor;
    const auto values = it->second->data();
    std::copy(values.begin(), values.end(), t.mutable_data().begin());
    ++copied;
  }
  return copied;
}

}  // namespace esrgan

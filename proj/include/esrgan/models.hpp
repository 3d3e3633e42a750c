#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "esrgan/optim.hpp"
#include "esrgan/rng.hpp"
#include "esrgan/tensor.hpp"

namespace esrgan {

inline constexpr double kLeakySlope = 0.2;
inline constexpr int kInnerBlocksPerRrdb = 3;

enum class BlockVariant : std::uint8_t {
  DenseBlock = 0,          // RRDB interior
  ResidualDenseBlock = 1,  // RRDRB interior: extra residuals every two layers
};

std::string_view to_string(BlockVariant v);
BlockVariant parse_block_variant(std::string_view text);

struct GeneratorSpec {
  int num_blocks = 23;
  int num_features = 64;
  int growth_channels = 32;
  int dense_layers = 5;
  int scale = 4;
  BlockVariant variant = BlockVariant::ResidualDenseBlock;
  bool noise_enabled = false;
  double residual_scaling = 0.2;
  /// Also inject noise after each outer RRDB residual (one extra scale
  /// vector per block). Off by default.
  bool noise_after_rrdb = false;

  /// Throws ConfigError on the first violated constraint.
  void validate() const;
  bool operator==(const GeneratorSpec&) const = default;
};

struct DiscriminatorSpec {
  int input_size = 128;
  int base_channels = 64;
  int num_downsample_stages = 5;
  bool use_batchnorm = true;
  int hidden_features = 100;

  void validate() const;
  bool operator==(const DiscriminatorSpec&) const = default;
};

/// Convolution with its parameters; bias is (1, co, 1, 1).
struct ConvLayer {
  Tensor weight;
  Tensor bias;
  int stride = 1;
  int padding = 1;

  Tensor forward(const Tensor& x) const;
};

/// Kaiming fan-in normal initialisation times `gain`, zero bias.
ConvLayer make_conv(int in_channels, int out_channels, int kernel, int stride, RngState& rng, double gain = 1.0,
                    bool requires_grad = true);

struct DenseBlockParams {
  std::vector<ConvLayer> convs;  // dense_layers entries
};

struct RrdbParams {
  std::array<DenseBlockParams, kInnerBlocksPerRrdb> inner;
  std::array<Tensor, kInnerBlocksPerRrdb> noise_scales;  // undefined when noise is off
  Tensor outer_noise_scale;                              // only with noise_after_rrdb
};

/// One dense block with its beta-scaled skip: x + beta * last_conv(...).
/// ResidualDenseBlock additionally replaces each growth-layer output i >= 3
/// (1-based) with output_i + output_{i-2} before it is concatenated onward.
Tensor dense_block_forward(const Tensor& x, BlockVariant variant, const DenseBlockParams& params, double beta);

/// features + scales[c] * N(0,1) map shared across channels, fresh per call.
Tensor inject_noise(const Tensor& features, const Tensor& scales, RngState& rng);

/// Three inner blocks (each followed by noise injection when scales are
/// present and `noise_rng` is non-null) wrapped in x + beta * chain(x).
Tensor rrdb_forward(const Tensor& x, BlockVariant variant, const RrdbParams& params, double beta,
                    RngState* noise_rng);

/// x4 super-resolution generator (RRDB / RRDRB trunk, optional noise inputs).
class Generator {
 public:
  Generator(GeneratorSpec spec, RngState& init_rng);

  const GeneratorSpec& spec() const { return spec_; }
  /// lr is (n, 3, h, w); output (n, 3, 4h, 4w), unclamped. Noise is injected
  /// only when the spec enables it and `noise_rng` is non-null.
  Tensor forward(const Tensor& lr, RngState* noise_rng) const;

  const std::vector<Parameter>& parameters() const { return params_; }
  std::vector<Parameter> noise_scales() const;
  const RrdbParams& block(std::size_t i) const { return blocks_.at(i); }

 private:
  void register_conv(const std::string& name, const ConvLayer& conv);

  GeneratorSpec spec_;
  ConvLayer head_;
  std::vector<RrdbParams> blocks_;
  ConvLayer trunk_;
  ConvLayer upconv1_;
  ConvLayer upconv2_;
  ConvLayer hr_conv_;
  ConvLayer last_;
  std::vector<Parameter> params_;
};

Generator build_generator(const GeneratorSpec& spec, RngState& rng);

/// VGG-style stack of stride-1 / stride-2 convolutions (optional batch norm)
/// followed by two affine layers; produces one raw logit per image.
class Discriminator {
 public:
  Discriminator(DiscriminatorSpec spec, RngState& init_rng);

  const DiscriminatorSpec& spec() const { return spec_; }
  /// image is (n, 3, s, s) with s == spec.input_size; returns (n, 1, 1, 1).
  Tensor forward(const Tensor& image) const;

  const std::vector<Parameter>& parameters() const { return params_; }

  struct Layer {
    ConvLayer conv;
    Tensor gamma;  // undefined without batch norm
    Tensor beta;
  };
  const std::vector<Layer>& layers() const { return layers_; }
  const ConvLayer& fc1() const { return fc1_; }
  const ConvLayer& fc2() const { return fc2_; }

 private:
  DiscriminatorSpec spec_;
  std::vector<Layer> layers_;
  ConvLayer fc1_;
  ConvLayer fc2_;
  std::vector<Parameter> params_;
};

std::size_t param_count(const std::vector<Parameter>& params);
template <typename Model>
std::size_t param_count(const Model& model) {
  return param_count(model.parameters());
}

// Weight files: magic, format version, model kind and spec fields, then named
// parameter records (name, NCHW extents, raw float64 LE) and a CRC-32.
std::vector<std::uint8_t> encode_weights(const Generator& g);
std::vector<std::uint8_t> encode_weights(const Discriminator& d);
/// Throws IntegrityError on corruption, IncompatibleError on spec mismatch.
void decode_weights(Generator& g, std::span<const std::uint8_t> bytes);
void decode_weights(Discriminator& d, std::span<const std::uint8_t> bytes);
GeneratorSpec peek_generator_spec(std::span<const std::uint8_t> bytes);

void save_weights(const Generator& g, const std::filesystem::path& path);
void save_weights(const Discriminator& d, const std::filesystem::path& path);
void load_weights(Generator& g, const std::filesystem::path& path);
void load_weights(Discriminator& d, const std::filesystem::path& path);

/// Overwrites `dst` parameter values with those of `src`, matching by name.
/// Parameters missing from `src` are left untouched; returns how many were copied.
std::size_t transplant_parameters(const std::vector<Parameter>& src, const std::vector<Parameter>& dst);

}  // namespace esrgan

#pragma once

#include <filesystem>
#include <string>

#include "esrgan/niqe.hpp"
#include "esrgan/training.hpp"

namespace esrgan {

/// Contents of an INI run configuration.
///
/// Sections: [train] [generator] [discriminator] [loss] [feature_extractor]
/// [adam] [augment] [data] [output] [eval]. Every key is optional and falls
/// back to the TrainConfig default; unknown sections or keys are rejected.
struct RunConfig {
  TrainConfig train;
  int crop_border = 4;
  int niqe_patch_size = niqe::kDefaultPatchSize;
};

/// Throws ConfigError naming the offending section, key or value.
RunConfig parse_run_config(const std::string& text, const std::string& source = "<config>");
RunConfig load_run_config(const std::filesystem::path& path);

}  // namespace esrgan

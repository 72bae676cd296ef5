#pragma once

#include <filesystem>
#include <iosfwd>

#include "finsent/model.hpp"

namespace finsent {

// Container layout:
//
//   finsent-checkpoint 1\n
//   config <count>\n
//   <key>=<value>\n ...                  (sorted by key)
//   tensors <count>\n
//   <name> <rank> <dim>...\n <raw little-endian float64 values>\n ...
//
// Writing is a pure function of (config, state), so save -> load -> save
// reproduces the same bytes.

struct Checkpoint {
    ModelConfig config;
    ModelParams params;
};

void save_checkpoint(std::ostream& out, const ModelConfig& config, const ModelParams& params);
void save_checkpoint(const std::filesystem::path& path, const ModelConfig& config, const ModelParams& params);

ModelConfig read_checkpoint_config(const std::filesystem::path& path);

// Copies every stored tensor into `params`. Missing, unexpected, or
// mis-shaped tensors raise ShapeError naming the tensor.
void load_checkpoint_state(std::istream& in, ModelParams& params);

// Reads the stored config, builds a model for `config` (the stored one when
// omitted), and fills it from the file.
Checkpoint load_checkpoint(const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path, const ModelConfig& config);

}  // namespace finsent

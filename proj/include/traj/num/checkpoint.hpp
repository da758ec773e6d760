#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "traj/num/graph.hpp"

// Checkpoint layout, all integers little-endian:
//   8 bytes  magic "TRJCKPT1"
//   u32      format version (1)
//   u32      section count
//   per section, sorted by name:
//     u32 name length, name bytes (UTF-8)
//     u32 rank, rank x u64 dims
//     product(dims) x f64 values, row-major

namespace traj::num {

using TensorMap = std::map<std::string, Tensor>;

void write_checkpoint(const std::filesystem::path& path, const TensorMap& sections);
TensorMap read_checkpoint(const std::filesystem::path& path);

std::string encode_checkpoint(const TensorMap& sections);
TensorMap decode_checkpoint(const std::string& bytes);

// Adds params under "<prefix><param name>".
void store_parameters(TensorMap& map, const std::string& prefix, const std::vector<Parameter*>& params);
// Restores values; every parameter must be present with a matching shape.
void load_parameters(const TensorMap& map, const std::string& prefix, const std::vector<Parameter*>& params);

}  // namespace traj::num

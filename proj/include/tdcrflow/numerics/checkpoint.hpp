#pragma once

// Single-file parameter container:
//
//   "TDCRCKPT1\n"
//   <manifest byte length, decimal>\n
//   <manifest: JSON text>
//   <live parameter blocks>  little-endian float64, manifest order
//   <EMA parameter blocks>   same order and shapes
//
// The manifest carries a "parameters" array of {name, shape}; everything
// else in it (architecture, hyperparameters, normalization stats, seed) is
// supplied by the caller.

#include <filesystem>
#include <string>

#include <json.hpp>

#include "tdcrflow/numerics/parameter.hpp"

namespace tdcr::num {

struct CheckpointData {
  nlohmann::json manifest;
  ParameterSet params;  // value and ema restored, grads zero
};

void write_checkpoint(const std::filesystem::path& path, nlohmann::json manifest,
                      const ParameterSet& params);
std::string encode_checkpoint(nlohmann::json manifest, const ParameterSet& params);

CheckpointData read_checkpoint(const std::filesystem::path& path);
CheckpointData decode_checkpoint(const std::string& bytes);

// Copies values and EMA from `src` into `dst`, matching by position; names
// and shapes must agree.
void load_parameters(ParameterSet& dst, const ParameterSet& src);

}  // namespace tdcr::num

#pragma once

// Dataset bundle on disk:
//   manifest.json    format version, robot spec, counts, stats, split, seed
//   points.bin       "TDCRPTS1", u32 K, N, d, then K*N*d float32 (metric units)
//   conditions.bin   "TDCRCND1", u32 K, D_c, then K*D_c float32 (raw values)
// All integers and floats little-endian.

#include <filesystem>
#include <string>

#include <json.hpp>

#include "tdcrflow/fm/trainer.hpp"
#include "tdcrflow/pointcloud/point_cloud.hpp"
#include "tdcrflow/synthgen/dataset.hpp"

namespace tdcr::cli {

inline constexpr int kBundleVersion = 1;

nlohmann::json stats_to_json(const pc::NormalizationStats& s);
pc::NormalizationStats stats_from_json(const nlohmann::json& j);

std::string encode_points(const synth::Dataset& ds);
std::string encode_conditions(const synth::Dataset& ds);
nlohmann::json bundle_manifest(const synth::Dataset& ds, const nlohmann::json& run_config);

// Writes the three files into `dir`, creating it if needed.
void write_bundle(const std::filesystem::path& dir, const synth::Dataset& ds,
                  const nlohmann::json& run_config = nlohmann::json::object());

struct Bundle {
  synth::Dataset dataset;
  nlohmann::json manifest;
};

Bundle read_bundle(const std::filesystem::path& dir);

// Normalized clouds and conditions, ready for training.
fm::TrainData to_train_data(const synth::Dataset& ds);

// Normalized condition for one raw condition row of a dataset.
std::vector<double> normalized_condition(const synth::Dataset& ds, std::size_t index);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, const std::string& bytes);

}  // namespace tdcr::cli

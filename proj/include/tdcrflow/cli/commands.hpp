#pragma once

// Subcommand implementations behind the tdcrflow executable. Each takes a
// plain options struct so tests can drive them without argument parsing.
// Every output carries the options it was produced with ("run_config").

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "tdcrflow/fm/trainer.hpp"
#include "tdcrflow/metrics/evaluate.hpp"
#include "tdcrflow/nets/config.hpp"
#include "tdcrflow/pointcloud/point_cloud.hpp"
#include "tdcrflow/synthgen/dataset.hpp"
#include "tdcrflow/synthgen/robot.hpp"

namespace tdcr::cli {

inline constexpr const char* kToolVersion = "1.0.0";

struct GenOptions {
  synth::RobotSpec robot;
  std::size_t samples = 100;
  std::size_t points = 2048;
  std::uint64_t seed = 0;
  bool include_base = false;
  bool color = false;
  std::optional<double> payload_max;
  double voxel = 0.005;
  std::filesystem::path out;
  bool force = false;

  nlohmann::json to_json() const;
};

struct TrainOptions {
  std::filesystem::path data;
  std::filesystem::path out;                   // checkpoint file
  std::optional<std::filesystem::path> loss_csv;  // default: <out>.loss.csv
  std::optional<std::filesystem::path> init;   // warm-start checkpoint
  nets::NetConfig net;                         // channels / condition width come from the data
  fm::TrainConfig train;

  std::filesystem::path loss_path() const;
  nlohmann::json to_json() const;
};

struct SampleOptions {
  std::filesystem::path checkpoint;
  std::filesystem::path out;  // .ply or .xyz
  std::vector<double> condition;
  bool raw = false;  // condition given in physical units
  std::size_t steps = 100;
  std::size_t points = 0;  // 0: the training point count
  std::uint64_t seed = 0;

  nlohmann::json to_json() const;
};

struct EvalOptions {
  std::optional<std::filesystem::path> checkpoint;  // not needed for baselines
  std::filesystem::path data;
  std::filesystem::path out;  // JSON report
  std::string split = "test";
  std::optional<std::string> baseline;  // "mean-shape"
  metrics::EvalConfig metrics;
  std::size_t steps = 100;
  std::uint64_t seed = 0;

  nlohmann::json to_json() const;
};

struct WorkspaceOptions {
  synth::RobotSpec robot;
  std::size_t sweep = 1000;
  std::uint64_t seed = 0;
  std::filesystem::path out;  // CSV; run config goes to <out>.run.json

  nlohmann::json to_json() const;
};

void run_gen(const GenOptions& opt, std::ostream& log);
fm::TrainResult run_train(const TrainOptions& opt, std::ostream& log);
void run_sample(const SampleOptions& opt, std::ostream& log);
metrics::MetricsReport run_eval(const EvalOptions& opt, std::ostream& log);
void run_workspace(const WorkspaceOptions& opt, std::ostream& log);

// Constant predictor: the union of all training clouds resampled to the
// dataset's point count, in normalized units.
pc::PointCloud mean_shape(const synth::Dataset& ds, std::uint64_t seed);

// Parses "0.1,0.2,..." into numbers.
std::vector<double> parse_condition(const std::string& text);

}  // namespace tdcr::cli

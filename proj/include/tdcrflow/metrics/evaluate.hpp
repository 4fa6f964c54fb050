#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "tdcrflow/pointcloud/point_cloud.hpp"

namespace tdcr::metrics {

struct EvalConfig {
  std::size_t n_eval = 512;
  std::size_t exact_cap = 1024;
  double auction_epsilon = 1e-5;  // meters; used only above exact_cap
};

struct PairMetrics {
  double cd = 0.0;   // metric scale, m^2
  double emd = 0.0;  // metric scale, m
  bool emd_exact = true;
};

// Denormalizes both clouds by `scale`, resamples each to n_eval points with
// its own seed and returns chamfer and EMD.
PairMetrics evaluate_pair(const pc::PointCloud& pred, const pc::PointCloud& gt, double scale,
                          const EvalConfig& cfg, std::uint64_t pred_seed, std::uint64_t gt_seed);

// Seeds derived as independent streams 0 (pred) and 1 (gt) of `seed`.
PairMetrics evaluate(const pc::PointCloud& pred, const pc::PointCloud& gt, double scale,
                     const EvalConfig& cfg, std::uint64_t seed);

struct SampleMetrics {
  std::size_t index = 0;  // dataset sample index
  double cd = 0.0;
  double emd = 0.0;
};

struct MetricsReport {
  std::string split;
  std::string mode;  // "model" or a baseline name
  std::size_t n_eval = 0;
  std::uint64_t seed = 0;
  bool emd_exact = true;
  double auction_epsilon = 0.0;
  std::vector<SampleMetrics> samples;

  double mean_cd() const;
  double mean_emd() const;
  nlohmann::json to_json() const;
};

inline constexpr double kCdPresentationFactor = 1e4;
inline constexpr double kEmdPresentationFactor = 1e3;

}  // namespace tdcr::metrics

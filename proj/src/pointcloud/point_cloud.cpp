#include "tdcrflow/pointcloud/point_cloud.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <numeric>

#include "tdcrflow/common/error.hpp"
#include "tdcrflow/common/rng.hpp"

namespace tdcr::pc {

PointCloud::PointCloud(std::size_t channels, std::vector<double> data, std::string frame)
    : channels_(channels), data_(std::move(data)), frame_(std::move(frame)) {
  TDCR_REQUIRE(channels_ == 3 || channels_ == 6, "point clouds have 3 or 6 channels, got " +
                                                     std::to_string(channels_));
  TDCR_REQUIRE(data_.size() % channels_ == 0, "point data length is not a multiple of the channel count");
}

PointCloud PointCloud::from_tensor(const num::Tensor& t, std::string frame) {
  TDCR_REQUIRE(t.rank() == 2, "point cloud tensor must be rank 2");
  return PointCloud(t.cols(), std::vector<double>(t.values().begin(), t.values().end()), std::move(frame));
}

num::Tensor PointCloud::to_tensor() const { return num::Tensor({size(), channels_}, data_); }

void PointCloud::append(std::span<const double> point) {
  TDCR_REQUIRE(point.size() == channels_, "appended point has the wrong channel count");
  data_.insert(data_.end(), point.begin(), point.end());
}

void PointCloud::validate() const {
  for (std::size_t i = 0; i < size(); ++i)
    for (std::size_t c = 0; c < channels_; ++c) {
      const double v = (*this)(i, c);
      TDCR_REQUIRE(std::isfinite(v), "point cloud contains a non-finite value at row " + std::to_string(i));
      if (c >= 3) TDCR_REQUIRE(v >= 0.0 && v <= 1.0, "color channel outside [0, 1] at row " + std::to_string(i));
    }
}

void NormalizationStats::validate() const {
  TDCR_REQUIRE(scale > 0.0 && std::isfinite(scale), "normalization scale must be positive");
  TDCR_REQUIRE(!motor_min.empty() && motor_min.size() == motor_max.size(),
               "motor bounds must be non-empty and of equal length");
  for (std::size_t j = 0; j < motor_min.size(); ++j)
    TDCR_REQUIRE(motor_max[j] > motor_min[j], "motor_max must exceed motor_min in dimension " + std::to_string(j));
  TDCR_REQUIRE(payload_min.has_value() == payload_max.has_value(), "payload bounds must come in pairs");
  if (payload_min) TDCR_REQUIRE(*payload_max > *payload_min, "payload_max must exceed payload_min");
}

namespace {

PointCloud scale_xyz(const PointCloud& cloud, double factor) {
  PointCloud out = cloud;
  for (std::size_t i = 0; i < out.size(); ++i)
    for (std::size_t c = 0; c < 3; ++c) out(i, c) *= factor;
  return out;
}

}  // namespace

PointCloud normalize_points(const PointCloud& cloud, double scale) {
  TDCR_REQUIRE(scale > 0.0, "normalize_points: scale must be positive");
  PointCloud out = cloud;
  for (std::size_t i = 0; i < out.size(); ++i)
    for (std::size_t c = 0; c < 3; ++c) out(i, c) /= scale;
  return out;
}

PointCloud denormalize_points(const PointCloud& cloud, double scale) {
  TDCR_REQUIRE(scale > 0.0, "denormalize_points: scale must be positive");
  return scale_xyz(cloud, scale);
}

NormalizedCondition normalize_condition(std::span<const double> motor, std::optional<double> payload,
                                        const NormalizationStats& stats) {
  TDCR_REQUIRE(motor.size() == stats.motor_min.size(),
               "motor vector has " + std::to_string(motor.size()) + " entries, stats expect " +
                   std::to_string(stats.motor_min.size()));
  TDCR_REQUIRE(!payload || stats.has_payload(), "payload given but the statistics carry no payload bounds");
  NormalizedCondition out;
  auto push = [&out](double raw, double lo, double hi) {
    const double v = (raw - lo) / (hi - lo);
    const double c = std::clamp(v, 0.0, 1.0);
    if (c != v) out.clamped = true;
    out.values.push_back(c);
  };
  for (std::size_t j = 0; j < motor.size(); ++j) push(motor[j], stats.motor_min[j], stats.motor_max[j]);
  if (payload) push(*payload, *stats.payload_min, *stats.payload_max);
  return out;
}

std::vector<double> denormalize_condition(std::span<const double> normalized,
                                          const NormalizationStats& stats) {
  TDCR_REQUIRE(normalized.size() == stats.condition_width(), "condition width does not match the statistics");
  std::vector<double> raw(normalized.size());
  for (std::size_t j = 0; j < stats.motor_min.size(); ++j)
    raw[j] = stats.motor_min[j] + normalized[j] * (stats.motor_max[j] - stats.motor_min[j]);
  if (stats.has_payload()) {
    const std::size_t j = stats.motor_min.size();
    raw[j] = *stats.payload_min + normalized[j] * (*stats.payload_max - *stats.payload_min);
  }
  return raw;
}

PointCloud voxel_downsample(const PointCloud& cloud, double voxel) {
  TDCR_REQUIRE(voxel > 0.0, "voxel_downsample: voxel edge must be positive");
  const std::size_t d = cloud.channels();
  struct Accum {
    std::vector<double> sum;
    double count = 0.0;
  };
  std::map<std::array<std::int64_t, 3>, Accum> cells;
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const auto p = cloud.point(i);
    const std::array<std::int64_t, 3> key{static_cast<std::int64_t>(std::floor(p[0] / voxel)),
                                          static_cast<std::int64_t>(std::floor(p[1] / voxel)),
                                          static_cast<std::int64_t>(std::floor(p[2] / voxel))};
    Accum& a = cells[key];
    if (a.sum.empty()) a.sum.assign(d, 0.0);
    for (std::size_t c = 0; c < d; ++c) a.sum[c] += p[c];
    a.count += 1.0;
  }
  std::vector<double> out;
  out.reserve(cells.size() * d);
  for (const auto& [key, a] : cells)
    for (std::size_t c = 0; c < d; ++c) out.push_back(a.sum[c] / a.count);
  return PointCloud(d, std::move(out), cloud.frame());
}

PointCloud resample_to_count(const PointCloud& cloud, std::size_t count, std::uint64_t seed) {
  TDCR_REQUIRE(!cloud.empty(), "resample_to_count: empty cloud");
  TDCR_REQUIRE(count >= 1, "resample_to_count: target count must be at least 1");
  Rng rng(seed);
  const std::size_t n = cloud.size();
  std::vector<std::size_t> pick;
  pick.reserve(count);
  if (n >= count) {
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    for (std::size_t i = 0; i < count; ++i) {
      const std::size_t j = i + static_cast<std::size_t>(rng.below(n - i));
      std::swap(idx[i], idx[j]);
      pick.push_back(idx[i]);
    }
  } else {
    for (std::size_t i = 0; i < n; ++i) pick.push_back(i);
    while (pick.size() < count) pick.push_back(static_cast<std::size_t>(rng.below(n)));
  }
  std::vector<double> out;
  out.reserve(count * cloud.channels());
  for (std::size_t i : pick) {
    const auto p = cloud.point(i);
    out.insert(out.end(), p.begin(), p.end());
  }
  return PointCloud(cloud.channels(), std::move(out), cloud.frame());
}

}  // namespace tdcr::pc

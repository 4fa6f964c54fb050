#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "tdcrflow/numerics/tensor.hpp"

namespace tdcr::pc {

// N x d points in a fixed world/base frame. d = 3 (xyz, meters) or d = 6
// (xyz + rgb in [0, 1]). Rows have set semantics: any permutation denotes the
// same cloud.
class PointCloud {
 public:
  PointCloud() = default;
  PointCloud(std::size_t channels, std::vector<double> data, std::string frame = "world");

  static PointCloud from_tensor(const num::Tensor& t, std::string frame = "world");
  num::Tensor to_tensor() const;

  std::size_t size() const { return channels_ == 0 ? 0 : data_.size() / channels_; }
  bool empty() const { return data_.empty(); }
  std::size_t channels() const { return channels_; }
  bool has_color() const { return channels_ == 6; }
  const std::string& frame() const { return frame_; }

  std::span<const double> point(std::size_t i) const { return {data_.data() + i * channels_, channels_}; }
  std::span<double> point(std::size_t i) { return {data_.data() + i * channels_, channels_}; }
  double operator()(std::size_t i, std::size_t c) const { return data_[i * channels_ + c]; }
  double& operator()(std::size_t i, std::size_t c) { return data_[i * channels_ + c]; }

  const std::vector<double>& data() const { return data_; }
  std::vector<double>& data() { return data_; }

  void append(std::span<const double> point);
  // Throws ContractViolation on NaN/Inf or colors outside [0, 1].
  void validate() const;

  friend bool operator==(const PointCloud&, const PointCloud&) = default;

 private:
  std::size_t channels_ = 3;
  std::vector<double> data_;
  std::string frame_ = "world";
};

// Dataset-level normalization statistics.
struct NormalizationStats {
  double scale = 1.0;
  std::vector<double> motor_min;
  std::vector<double> motor_max;
  std::optional<double> payload_min;
  std::optional<double> payload_max;

  bool has_payload() const { return payload_min.has_value(); }
  std::size_t condition_width() const { return motor_min.size() + (has_payload() ? 1 : 0); }
  void validate() const;
};

// Origin-anchored global scaling: xyz / s, no translation, colors untouched.
PointCloud normalize_points(const PointCloud& cloud, double scale);
PointCloud denormalize_points(const PointCloud& cloud, double scale);

struct NormalizedCondition {
  std::vector<double> values;  // [m~ | p~]
  bool clamped = false;        // some raw value fell outside the stats range
};

// Per-dimension min-max normalization of the motor vector and optional
// payload, clamped to [0, 1].
NormalizedCondition normalize_condition(std::span<const double> motor, std::optional<double> payload,
                                        const NormalizationStats& stats);

// Inverse map, used to turn normalized conditions back into raw commands.
std::vector<double> denormalize_condition(std::span<const double> normalized,
                                          const NormalizationStats& stats);

// One point per occupied voxel (index floor(coord / voxel) per axis) at the
// centroid of its members, all channels averaged. Output is ordered by voxel
// index.
PointCloud voxel_downsample(const PointCloud& cloud, double voxel);

// Subset without replacement when the cloud has at least `count` points,
// otherwise the original points followed by uniform duplicates.
PointCloud resample_to_count(const PointCloud& cloud, std::size_t count, std::uint64_t seed);

}  // namespace tdcr::pc

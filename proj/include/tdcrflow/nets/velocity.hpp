#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <vector>

#include <json.hpp>

#include "tdcrflow/nets/config.hpp"
#include "tdcrflow/nets/layers.hpp"
#include "tdcrflow/numerics/graph.hpp"
#include "tdcrflow/numerics/parameter.hpp"

namespace tdcr::nets {

// A batch of B clouds with `points` rows each, stacked sample-major.
struct FlowInput {
  num::Tensor x;           // (B * points) x d
  std::vector<double> t;   // B flow times
  num::Tensor c;           // B x condition width
  std::size_t points = 0;

  std::size_t batch() const { return t.size(); }
  std::vector<std::int32_t> sample_of_rows() const;
  void validate(std::size_t channels, std::size_t condition_width) const;
};

// Anything that can be integrated by the sampler.
class VelocityField {
 public:
  virtual ~VelocityField() = default;
  virtual std::size_t channels() const = 0;
  virtual std::size_t condition_width() const = 0;
  // u(x, t | c) for one cloud, N x d.
  virtual num::Tensor velocity(const num::Tensor& x, double t, std::span<const double> c) const = 0;
};

class VelocityNet : public VelocityField {
 public:
  explicit VelocityNet(NetConfig cfg) : cfg_(std::move(cfg)) {}

  const NetConfig& config() const { return cfg_; }
  num::ParameterSet& params() { return params_; }
  const num::ParameterSet& params() const { return params_; }

  std::size_t channels() const override { return cfg_.channels; }
  std::size_t condition_width() const override { return cfg_.condition_width; }

  // Builds the network on `g`. Live weights on a tracking graph accumulate
  // into Parameter::grad on backward().
  virtual num::Var forward(num::Graph& g, const FlowInput& in, num::Weights w) = 0;

  // Inference with `inference_weights` (EMA by default).
  num::Tensor velocity(const num::Tensor& x, double t, std::span<const double> c) const override;
  num::Tensor velocity(const FlowInput& in) const;

  num::Weights inference_weights = num::Weights::ema;

 protected:
  ParamView view(num::Weights w) { return ParamView{&params_, w}; }

  NetConfig cfg_;
  num::ParameterSet params_;
};

class MlpVelocityNet : public VelocityNet {
 public:
  MlpVelocityNet(NetConfig cfg, std::uint64_t seed);
  num::Var forward(num::Graph& g, const FlowInput& in, num::Weights w) override;

 private:
  Embedding embed_;
  Linear lift_x_, lift_e_;
  std::vector<FilmBlock> blocks_;
  Linear head_;
};

// Voxel-grid indexing used by the hybrid context.
struct VoxelAssignment {
  std::vector<std::int32_t> voxel_of_row;   // compact voxel id per point
  std::vector<std::int32_t> sample_of_voxel;
  std::vector<std::uint32_t> order;         // rows sorted by (voxel, x, y, z)
  std::vector<std::int32_t> neighbors;      // 8 per row, -1 when empty
  std::vector<double> weights;              // 8 per row, renormalized
  std::size_t voxels = 0;
};

VoxelAssignment assign_voxels(const FlowInput& in, std::size_t resolution, double bound);

class HybridVelocityNet : public VelocityNet {
 public:
  HybridVelocityNet(NetConfig cfg, std::uint64_t seed);
  num::Var forward(num::Graph& g, const FlowInput& in, num::Weights w) override;

  struct Context {
    num::Var local, global;  // C_pv and broadcast C_global, N x d_c
    std::vector<double> gate;  // per row
  };
  Context context(num::Graph& g, const FlowInput& in, num::Var e, num::Weights w);

 private:
  Embedding embed_;
  Linear point_x_, point_e_;
  std::vector<FilmBlock> voxel_blocks_;  // one per scale
  Linear local_proj_, global_proj_;
  Linear lift_x_, lift_e_, lift_c_;
  std::vector<FilmBlock> blocks_;
  Linear head_;
};

std::unique_ptr<VelocityNet> make_network(const NetConfig& cfg, std::uint64_t seed);

// Checkpoint manifest fields describing the network.
nlohmann::json network_manifest(const VelocityNet& net);
std::unique_ptr<VelocityNet> network_from_manifest(const nlohmann::json& manifest, const num::ParameterSet& params);

}  // namespace tdcr::nets

#include "tdcrflow/nets/velocity.hpp"

#include "tdcrflow/common/error.hpp"
#include "tdcrflow/numerics/checkpoint.hpp"

namespace tdcr::nets {

std::vector<std::int32_t> FlowInput::sample_of_rows() const {
  std::vector<std::int32_t> idx(batch() * points);
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = static_cast<std::int32_t>(i / points);
  return idx;
}

void FlowInput::validate(std::size_t channels, std::size_t condition_width) const {
  TDCR_REQUIRE(batch() >= 1 && points >= 1, "flow input: empty batch or cloud");
  TDCR_REQUIRE(x.rank() == 2 && x.rows() == batch() * points && x.cols() == channels,
               "flow input: points tensor is " + x.shape_string() + ", expected " +
                   std::to_string(batch() * points) + "x" + std::to_string(channels));
  TDCR_REQUIRE(c.rank() == 2 && c.rows() == batch() && c.cols() == condition_width,
               "flow input: condition tensor is " + c.shape_string() + ", expected " + std::to_string(batch()) +
                   "x" + std::to_string(condition_width));
}

num::Tensor VelocityNet::velocity(const FlowInput& in) const {
  num::Graph g(false);
  // The graph does not track gradients, so forward never writes through the
  // parameter set.
  auto& self = const_cast<VelocityNet&>(*this);
  return g.value(self.forward(g, in, inference_weights));
}

num::Tensor VelocityNet::velocity(const num::Tensor& x, double t, std::span<const double> c) const {
  TDCR_REQUIRE(c.size() == cfg_.condition_width, "condition has " + std::to_string(c.size()) +
                                                     " entries, network expects " +
                                                     std::to_string(cfg_.condition_width));
  FlowInput in;
  in.x = x;
  in.points = x.rows();
  in.t = {t};
  in.c = num::Tensor({1, c.size()}, std::vector<double>(c.begin(), c.end()));
  return velocity(in);
}

std::unique_ptr<VelocityNet> make_network(const NetConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  if (cfg.arch == "mlp") return std::make_unique<MlpVelocityNet>(cfg, seed);
  return std::make_unique<HybridVelocityNet>(cfg, seed);
}

nlohmann::json network_manifest(const VelocityNet& net) { return {{"network", net.config().to_json()}}; }

std::unique_ptr<VelocityNet> network_from_manifest(const nlohmann::json& manifest, const num::ParameterSet& params) {
  if (!manifest.contains("network")) throw FormatError("checkpoint manifest has no network section");
  auto net = make_network(NetConfig::from_json(manifest.at("network")), 0);
  num::load_parameters(net->params(), params);
  return net;
}

}  // namespace tdcr::nets

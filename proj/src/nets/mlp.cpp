#include "tdcrflow/nets/velocity.hpp"

namespace tdcr::nets {

MlpVelocityNet::MlpVelocityNet(NetConfig cfg, std::uint64_t seed) : VelocityNet(std::move(cfg)) {
  cfg_.validate();
  Rng rng(seed);
  embed_ = Embedding::make(params_, cfg_, rng);
  lift_x_ = Linear::make(params_, "lift.x", cfg_.channels, cfg_.width, rng, 1.0, false, false);
  lift_e_ = Linear::make(params_, "lift.e", cfg_.embed_width, cfg_.width, rng);
  for (std::size_t i = 0; i < cfg_.blocks; ++i)
    blocks_.push_back(FilmBlock::make(params_, "block" + std::to_string(i), cfg_.width, cfg_.embed_width,
                                      cfg_.ln_eps, rng));
  head_ = Linear::make(params_, "head", cfg_.width, cfg_.channels, rng, 1.0, true);
}

num::Var MlpVelocityNet::forward(num::Graph& g, const FlowInput& in, num::Weights w) {
  in.validate(cfg_.channels, cfg_.condition_width);
  const ParamView pv = view(w);
  const auto rows_of = in.sample_of_rows();
  num::Var e = embed_(g, pv, in.t, in.c);
  // Lifting [x | e] is split into a per-point and a per-sample product.
  num::Var h = num::add(lift_x_(g, pv, g.constant(in.x)), num::gather_rows(lift_e_(g, pv, e), rows_of));
  for (const auto& b : blocks_) h = b(g, pv, h, e, rows_of);
  return head_(g, pv, num::silu(h));
}

}  // namespace tdcr::nets

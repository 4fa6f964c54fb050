#include "tdcrflow/nets/layers.hpp"

#include <cmath>
#include <numbers>

#include "tdcrflow/common/error.hpp"

namespace tdcr::nets {

using num::Graph;
using num::Tensor;
using num::Var;

std::vector<double> time_features(double t, std::size_t pairs, double base) {
  std::vector<double> f(2 * pairs);
  for (std::size_t j = 0; j < pairs; ++j) {
    const double w = 2.0 * std::numbers::pi * std::pow(base, static_cast<double>(j));
    f[2 * j] = std::sin(w * t);
    f[2 * j + 1] = std::cos(w * t);
  }
  return f;
}

double time_gate(double t, double k, double tau) {
  const double z = k * (t - tau);
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

Var ParamView::operator()(Graph& g, std::size_t index) const {
  num::Parameter& p = (*params)[index];
  if (g.tracking() && weights == num::Weights::live) return g.parameter(p, weights);
  return g.parameter(static_cast<const num::Parameter&>(p), weights);
}

Linear Linear::make(num::ParameterSet& ps, const std::string& name, std::size_t in, std::size_t out, Rng& rng,
                    double gain, bool zero, bool bias) {
  Linear l;
  l.w = zero ? ps.add_zeros(name + ".w", {in, out}) : ps.add_glorot(name + ".w", in, out, rng, gain);
  if (bias) l.b = ps.add_zeros(name + ".b", {1, out});
  return l;
}

Var Linear::operator()(Graph& g, const ParamView& pv, Var x) const {
  Var y = num::matmul(x, pv(g, w));
  return b == kNoBias ? y : num::add_row(y, pv(g, b));
}

Embedding Embedding::make(num::ParameterSet& ps, const NetConfig& cfg, Rng& rng) {
  Embedding e;
  e.pairs = cfg.frequencies;
  e.base = cfg.frequency_base;
  e.time = Linear::make(ps, "embed.time", 2 * cfg.frequencies, cfg.embed_width, rng);
  e.cond = Linear::make(ps, "embed.cond", cfg.condition_width, cfg.embed_width, rng);
  return e;
}

Var Embedding::operator()(Graph& g, const ParamView& pv, std::span<const double> t, const Tensor& c) const {
  TDCR_REQUIRE(c.rows() == t.size(), "embedding: one condition row per flow time");
  Tensor feats = Tensor::matrix(t.size(), 2 * pairs);
  for (std::size_t b = 0; b < t.size(); ++b) {
    const auto f = time_features(t[b], pairs, base);
    std::copy(f.begin(), f.end(), feats.row(b).begin());
  }
  return num::add(time(g, pv, g.constant(std::move(feats))), cond(g, pv, g.constant(c)));
}

Var film(Var h, Var gamma, Var beta, double eps) {
  return num::add(num::mul(num::add_scalar(gamma, 1.0), num::layer_norm(h, eps)), beta);
}

FilmBlock FilmBlock::make(num::ParameterSet& ps, const std::string& name, std::size_t width, std::size_t embed,
                          double eps, Rng& rng) {
  FilmBlock b;
  b.eps = eps;
  b.gamma = Linear::make(ps, name + ".gamma", embed, width, rng, 1.0, true);
  b.beta = Linear::make(ps, name + ".beta", embed, width, rng, 1.0, true);
  b.inner = Linear::make(ps, name + ".inner", width, width, rng);
  b.outer = Linear::make(ps, name + ".outer", width, width, rng, 0.5);
  return b;
}

Var FilmBlock::operator()(Graph& g, const ParamView& pv, Var h, Var e, std::span<const std::int32_t> rows_of) const {
  Var gm = num::gather_rows(gamma(g, pv, e), rows_of);
  Var bt = num::gather_rows(beta(g, pv, e), rows_of);
  Var z = num::silu(inner(g, pv, film(h, gm, bt, eps)));
  return num::add(h, outer(g, pv, z));
}

}  // namespace tdcr::nets

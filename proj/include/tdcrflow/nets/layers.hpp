#pragma once

// Building blocks shared by the two velocity networks. Layers hold indices
// into the owning ParameterSet and look their tensors up at forward time.

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "tdcrflow/common/rng.hpp"
#include "tdcrflow/numerics/graph.hpp"
#include "tdcrflow/numerics/parameter.hpp"
#include "tdcrflow/nets/config.hpp"

namespace tdcr::nets {

// [sin(w_j t), cos(w_j t)] for w_j = 2 pi base^j, j = 0..pairs-1.
std::vector<double> time_features(double t, std::size_t pairs, double base);

// Logistic gate sigmoid(k (t - tau)).
double time_gate(double t, double k, double tau);

// Parameter accessor that respects the requested weights and graph mode.
struct ParamView {
  num::ParameterSet* params;
  num::Weights weights;
  num::Var operator()(num::Graph& g, std::size_t index) const;
};

struct Linear {
  static constexpr std::size_t kNoBias = static_cast<std::size_t>(-1);
  std::size_t w = 0, b = kNoBias;
  static Linear make(num::ParameterSet& ps, const std::string& name, std::size_t in, std::size_t out, Rng& rng,
                     double gain = 1.0, bool zero = false, bool bias = true);
  num::Var operator()(num::Graph& g, const ParamView& pv, num::Var x) const;
};

// e(t, c) = project(time features) + project(c), one row per sample.
struct Embedding {
  Linear time, cond;
  std::size_t pairs = 0;
  double base = 2.0;
  static Embedding make(num::ParameterSet& ps, const NetConfig& cfg, Rng& rng);
  num::Var operator()(num::Graph& g, const ParamView& pv, std::span<const double> t, const num::Tensor& c) const;
};

// (1 + gamma) * LN(h) + beta with gamma, beta given per row.
num::Var film(num::Var h, num::Var gamma, num::Var beta, double eps);

// h + W2 silu(W1 film(h, e) + b1) + b2. `rows_of` maps every row of h to
// its row of the per-sample embedding.
struct FilmBlock {
  Linear gamma, beta, inner, outer;
  double eps = 1e-5;
  static FilmBlock make(num::ParameterSet& ps, const std::string& name, std::size_t width, std::size_t embed,
                        double eps, Rng& rng);
  num::Var operator()(num::Graph& g, const ParamView& pv, num::Var h, num::Var e,
                      std::span<const std::int32_t> rows_of) const;
};

}  // namespace tdcr::nets

#pragma once

// Central finite-difference gradient checks shared by unit and acceptance
// tests.

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "tdcrflow/common/rng.hpp"
#include "tdcrflow/numerics/graph.hpp"
#include "tdcrflow/numerics/parameter.hpp"

namespace tdcr::testing {

// ||a - n|| / max(||a|| + ||n||, floor), with the norms over all entries.
inline double relative_error(const std::vector<double>& analytic, const std::vector<double>& numeric,
                             double floor = 1e-10) {
  double diff = 0.0, na = 0.0, nn = 0.0;
  for (std::size_t i = 0; i < analytic.size(); ++i) {
    diff += (analytic[i] - numeric[i]) * (analytic[i] - numeric[i]);
    na += analytic[i] * analytic[i];
    nn += numeric[i] * numeric[i];
  }
  return std::sqrt(diff) / std::max(std::sqrt(na) + std::sqrt(nn), floor);
}

using LeafLoss = std::function<num::Var(num::Graph&, const std::vector<num::Var>&)>;

// Worst relative error over the given leaf tensors of a scalar loss.
inline double check_leaves(const LeafLoss& loss, std::vector<num::Tensor> leaves, double h = 1e-5) {
  num::Graph g;
  std::vector<num::Var> vars;
  for (const auto& t : leaves) vars.push_back(g.variable(t));
  g.backward(loss(g, vars));

  auto eval = [&](const std::vector<num::Tensor>& ts) {
    num::Graph f;
    std::vector<num::Var> vs;
    for (const auto& t : ts) vs.push_back(f.variable(t));
    return loss(f, vs).value()[0];
  };

  double worst = 0.0;
  for (std::size_t k = 0; k < leaves.size(); ++k) {
    const num::Tensor& ga = g.grad(vars[k]);
    std::vector<double> analytic(ga.values().begin(), ga.values().end()), numeric(ga.size());
    for (std::size_t i = 0; i < leaves[k].size(); ++i) {
      const double x = leaves[k][i];
      leaves[k][i] = x + h;
      const double up = eval(leaves);
      leaves[k][i] = x - h;
      const double down = eval(leaves);
      leaves[k][i] = x;
      numeric[i] = (up - down) / (2.0 * h);
    }
    worst = std::max(worst, relative_error(analytic, numeric));
  }
  return worst;
}

using ParamLoss = std::function<num::Var(num::Graph&)>;

// Same check over every live parameter; `loss` must read live weights.
// Returns the worst per-parameter relative error.
inline double check_parameters(num::ParameterSet& params, const ParamLoss& loss, double h = 1e-5) {
  params.zero_grad();
  {
    num::Graph g;
    g.backward(loss(g));
  }
  auto eval = [&] {
    num::Graph f;
    return loss(f).value()[0];
  };
  double worst = 0.0;
  for (auto& p : params) {
    std::vector<double> analytic(p.grad.values().begin(), p.grad.values().end()), numeric(p.value.size());
    for (std::size_t i = 0; i < p.value.size(); ++i) {
      const double x = p.value[i];
      p.value[i] = x + h;
      const double up = eval();
      p.value[i] = x - h;
      const double down = eval();
      p.value[i] = x;
      numeric[i] = (up - down) / (2.0 * h);
    }
    worst = std::max(worst, relative_error(analytic, numeric));
  }
  return worst;
}

inline num::Tensor random_tensor(std::size_t rows, std::size_t cols, Rng& rng, double scale = 1.0) {
  num::Tensor t = num::Tensor::matrix(rows, cols);
  for (double& v : t.values()) v = scale * rng.normal();
  return t;
}

// Replaces every parameter with random values so zero-initialised heads do
// not hide gradient paths.
inline void randomize(num::ParameterSet& params, Rng& rng, double scale = 0.3) {
  for (auto& p : params) {
    for (double& v : p.value.values()) v = scale * rng.normal();
    p.ema = p.value;
  }
}

}  // namespace tdcr::testing

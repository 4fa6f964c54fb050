#pragma once

// Finite-difference cases for every graph primitive, shared by the unit
// suite and the acceptance binary.

#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "gradcheck.hpp"
#include "tdcrflow/numerics/graph.hpp"

namespace tdcr::testing {

struct GradCase {
  std::string name;
  std::function<double(Rng&)> run;  // worst relative error
};

inline std::vector<GradCase> primitive_cases() {
  using namespace tdcr::num;
  std::vector<GradCase> cases;
  cases.push_back({"matmul", [](Rng& rng) {
                     return check_leaves([](Graph&, const auto& v) { return sum(square(matmul(v[0], v[1]))); },
                                         {random_tensor(4, 3, rng), random_tensor(3, 5, rng)});
                   }});
  cases.push_back({"add_sub_mul", [](Rng& rng) {
                     auto loss = [](Graph&, const std::vector<Var>& v) {
                       return sum(mul(add(v[0], v[1]), sub(v[0], square(v[1]))));
                     };
                     return check_leaves(loss, {random_tensor(3, 4, rng), random_tensor(3, 4, rng)});
                   }});
  cases.push_back({"add_row_scale_add_scalar", [](Rng& rng) {
                     auto loss = [](Graph&, const std::vector<Var>& v) {
                       return sum(square(add_scalar(scale(add_row(v[0], v[1]), -1.7), 0.3)));
                     };
                     return check_leaves(loss, {random_tensor(5, 3, rng), random_tensor(1, 3, rng)});
                   }});
  cases.push_back({"scale_rows", [](Rng& rng) {
                     const std::vector<double> s{0.5, -2.0, 3.0};
                     auto loss = [&](Graph&, const std::vector<Var>& v) { return sum(square(scale_rows(v[0], s))); };
                     return check_leaves(loss, {random_tensor(3, 4, rng)});
                   }});
  cases.push_back({"layer_norm", [](Rng& rng) {
                     const Tensor w = random_tensor(4, 6, rng);
                     auto loss = [&](Graph& g, const std::vector<Var>& v) {
                       return sum(mul(layer_norm(v[0], 1e-5), g.constant(w)));
                     };
                     return check_leaves(loss, {random_tensor(4, 6, rng)});
                   }});
  cases.push_back({"activations", [](Rng& rng) {
                     const Tensor w = random_tensor(3, 5, rng);
                     auto loss = [&](Graph& g, const std::vector<Var>& v) {
                       Var k = g.constant(w);
                       return add(add(sum(mul(sigmoid(v[0]), k)), sum(mul(silu(v[0]), k))),
                                  sum(mul(relu(v[0]), k)));
                     };
                     // Keep inputs away from the relu kink.
                     Tensor x = random_tensor(3, 5, rng);
                     for (double& e : x.values())
                       if (std::abs(e) < 0.05) e += 0.1;
                     return check_leaves(loss, {x});
                   }});
  cases.push_back({"reductions", [](Rng& rng) {
                     auto loss = [](Graph&, const std::vector<Var>& v) {
                       return add(mean(square(v[0])), scale(sum(v[0]), 0.25));
                     };
                     return check_leaves(loss, {random_tensor(3, 3, rng)});
                   }});
  cases.push_back({"concat_slice", [](Rng& rng) {
                     auto loss = [](Graph&, const std::vector<Var>& v) {
                       std::vector<Var> parts{v[0], v[1]};
                       Var c = concat_cols(parts);
                       return sum(square(mul(slice_cols(c, 1, 4), slice_cols(c, 2, 5))));
                     };
                     return check_leaves(loss, {random_tensor(3, 2, rng), random_tensor(3, 3, rng)});
                   }});
  cases.push_back({"gather_rows", [](Rng& rng) {
                     const std::vector<std::int32_t> idx{2, 0, 2, 1, 1, 2};
                     auto loss = [&](Graph&, const std::vector<Var>& v) { return sum(square(gather_rows(v[0], idx))); };
                     return check_leaves(loss, {random_tensor(3, 4, rng)});
                   }});
  cases.push_back({"scatter_mean", [](Rng& rng) {
                     const std::vector<std::int32_t> bin{1, 0, 1, 3, 1, 0};
                     const Tensor w = random_tensor(4, 2, rng);
                     auto loss = [&](Graph& g, const std::vector<Var>& v) {
                       return sum(mul(square(scatter_mean(v[0], bin, 4)), g.constant(w)));
                     };
                     return check_leaves(loss, {random_tensor(6, 2, rng)});
                   }});
  cases.push_back({"weighted_gather", [](Rng& rng) {
                     const std::vector<std::int32_t> idx{0, 2, -1, 1, 1, 0};
                     const std::vector<double> wt{0.25, 0.75, 0.3, 0.4, 0.6, -1.2};
                     auto loss = [&](Graph&, const std::vector<Var>& v) {
                       return sum(square(weighted_gather(v[0], idx, wt, 2)));
                     };
                     return check_leaves(loss, {random_tensor(3, 4, rng)});
                   }});
  cases.push_back({"composed", [](Rng& rng) {
                     // Up to five layers of width <= 16 with random activations.
                     double worst = 0.0;
                     for (int trial = 0; trial < 10; ++trial) {
                       const std::size_t layers = 1 + rng.below(5);
                       std::vector<std::size_t> widths{1 + rng.below(16)};
                       for (std::size_t l = 0; l < layers; ++l) widths.push_back(1 + rng.below(16));
                       std::vector<int> act(layers);
                       for (auto& a : act) a = static_cast<int>(rng.below(3));
                       std::vector<Tensor> leaves{random_tensor(4, widths[0], rng)};
                       for (std::size_t l = 0; l < layers; ++l) {
                         leaves.push_back(random_tensor(widths[l], widths[l + 1], rng, 0.5));
                         leaves.push_back(random_tensor(1, widths[l + 1], rng, 0.1));
                       }
                       auto loss = [&](Graph&, const std::vector<Var>& v) {
                         Var h = v[0];
                         for (std::size_t l = 0; l < layers; ++l) {
                           h = linear(h, v[1 + 2 * l], v[2 + 2 * l]);
                           h = act[l] == 0 ? silu(h) : act[l] == 1 ? sigmoid(h) : layer_norm(h, 1e-5);
                         }
                         return mean(square(h));
                       };
                       worst = std::max(worst, check_leaves(loss, leaves));
                     }
                     return worst;
                   }});
  return cases;
}

}  // namespace tdcr::testing

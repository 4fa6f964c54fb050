#pragma once

#include <cstddef>
#include <span>
#include <utility>

#include "tdcrflow/common/rng.hpp"
#include "tdcrflow/nets/velocity.hpp"
#include "tdcrflow/numerics/graph.hpp"
#include "tdcrflow/numerics/tensor.hpp"

namespace tdcr::fm {

// Beta(alpha, 1) by inverse CDF: t = U^(1/alpha).
double sample_time(double alpha, Rng& rng);
double time_from_uniform(double u, double alpha);

// rows x cols iid N(0, sigma^2).
num::Tensor sample_prior(std::size_t rows, std::size_t cols, double sigma, Rng& rng);

// (X_t, target velocity) on the straight path from x0 to x1.
std::pair<num::Tensor, num::Tensor> interpolate(const num::Tensor& x0, const num::Tensor& x1, double t);

// Mean squared XYZ residual plus lambda_rgb times mean squared RGB residual,
// averaged over samples. Rows of the inputs are points of equally sized
// clouds, so one global mean per channel group equals the per-sample mean.
double fm_loss(const num::Tensor& pred, const num::Tensor& target, std::size_t channels, double lambda_rgb);
num::Var fm_loss(num::Var pred, num::Var target, std::size_t channels, double lambda_rgb);

// Heun integration of dx/dt = u(x, t | c) from t = 0 to 1 in `steps` steps,
// starting at x0.
num::Tensor integrate_heun(const nets::VelocityField& field, num::Tensor x0, std::span<const double> condition,
                           std::size_t steps);

// Draws x0 from the prior and integrates; result in normalized units.
num::Tensor sample_shape(const nets::VelocityField& field, std::span<const double> condition, std::size_t points,
                         std::size_t steps, double sigma, Rng& rng);

}  // namespace tdcr::fm

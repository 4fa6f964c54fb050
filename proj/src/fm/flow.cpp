#include "tdcrflow/fm/flow.hpp"

#include <cmath>

#include "tdcrflow/common/error.hpp"

namespace tdcr::fm {

double time_from_uniform(double u, double alpha) {
  TDCR_REQUIRE(alpha > 0.0, "sample_time: alpha must be positive");
  return std::pow(u, 1.0 / alpha);
}

double sample_time(double alpha, Rng& rng) { return time_from_uniform(rng.uniform(), alpha); }

num::Tensor sample_prior(std::size_t rows, std::size_t cols, double sigma, Rng& rng) {
  TDCR_REQUIRE(sigma > 0.0, "sample_prior: sigma must be positive");
  num::Tensor x = num::Tensor::matrix(rows, cols);
  for (double& v : x.values()) v = sigma * rng.normal();
  return x;
}

std::pair<num::Tensor, num::Tensor> interpolate(const num::Tensor& x0, const num::Tensor& x1, double t) {
  TDCR_REQUIRE(x0.same_shape(x1), "interpolate: shape mismatch " + x0.shape_string() + " vs " + x1.shape_string());
  TDCR_REQUIRE(t >= 0.0 && t <= 1.0, "interpolate: t must lie in [0, 1]");
  num::Tensor xt = x0, u = x1;
  for (std::size_t i = 0; i < xt.size(); ++i) {
    xt[i] = (1.0 - t) * x0[i] + t * x1[i];
    u[i] = x1[i] - x0[i];
  }
  return {std::move(xt), std::move(u)};
}

double fm_loss(const num::Tensor& pred, const num::Tensor& target, std::size_t channels, double lambda_rgb) {
  TDCR_REQUIRE(channels == 3 || channels == 6, "fm_loss: point width must be 3 or 6");
  TDCR_REQUIRE(pred.same_shape(target) && pred.cols() == channels, "fm_loss: shape mismatch");
  const std::size_t n = pred.rows();
  double geo = 0.0, rgb = 0.0;
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t c = 0; c < channels; ++c) {
      const double d = pred(r, c) - target(r, c);
      (c < 3 ? geo : rgb) += d * d;
    }
  const double count = 3.0 * static_cast<double>(n);
  return geo / count + (channels == 6 ? lambda_rgb * rgb / count : 0.0);
}

num::Var fm_loss(num::Var pred, num::Var target, std::size_t channels, double lambda_rgb) {
  TDCR_REQUIRE(channels == 3 || channels == 6, "fm_loss: point width must be 3 or 6");
  TDCR_REQUIRE(pred.value().same_shape(target.value()) && pred.cols() == channels, "fm_loss: shape mismatch");
  num::Var diff = num::sub(pred, target);
  if (channels == 3) return num::mean(num::square(diff));
  num::Var geo = num::mean(num::square(num::slice_cols(diff, 0, 3)));
  num::Var rgb = num::mean(num::square(num::slice_cols(diff, 3, 6)));
  return num::add(geo, num::scale(rgb, lambda_rgb));
}

num::Tensor integrate_heun(const nets::VelocityField& field, num::Tensor x, std::span<const double> condition,
                           std::size_t steps) {
  TDCR_REQUIRE(steps >= 1, "sampler: need at least one step");
  TDCR_REQUIRE(x.cols() == field.channels(), "sampler: point width does not match the field");
  const double h = 1.0 / static_cast<double>(steps);
  for (std::size_t k = 0; k < steps; ++k) {
    const double t0 = static_cast<double>(k) * h;
    const double t1 = static_cast<double>(k + 1) * h;
    const num::Tensor v1 = field.velocity(x, t0, condition);
    num::Tensor xp = x;
    for (std::size_t i = 0; i < xp.size(); ++i) xp[i] += h * v1[i];
    const num::Tensor v2 = field.velocity(xp, t1, condition);
    for (std::size_t i = 0; i < x.size(); ++i) x[i] += 0.5 * h * (v1[i] + v2[i]);
    if (!x.all_finite()) throw NumericError("sampler: state became non-finite at step " + std::to_string(k));
  }
  return x;
}

num::Tensor sample_shape(const nets::VelocityField& field, std::span<const double> condition, std::size_t points,
                         std::size_t steps, double sigma, Rng& rng) {
  TDCR_REQUIRE(points >= 1, "sampler: need at least one point");
  return integrate_heun(field, sample_prior(points, field.channels(), sigma, rng), condition, steps);
}

}  // namespace tdcr::fm

#include "tdcrflow/numerics/parameter.hpp"

#include <algorithm>
#include <cmath>

#include "tdcrflow/common/error.hpp"

namespace tdcr::num {

std::size_t ParameterSet::add(std::string name, Tensor init) {
  TDCR_REQUIRE(find(name) == nullptr, "duplicate parameter name: " + name);
  Parameter p;
  p.name = std::move(name);
  p.grad = Tensor(init.shape());
  p.ema = init;
  p.value = std::move(init);
  params_.push_back(std::move(p));
  return params_.size() - 1;
}

std::size_t ParameterSet::add_glorot(std::string name, std::size_t fan_in, std::size_t fan_out,
                                     Rng& rng, double gain) {
  Tensor w = Tensor::matrix(fan_in, fan_out);
  const double bound = gain * std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  for (double& v : w.values()) v = rng.uniform(-bound, bound);
  return add(std::move(name), std::move(w));
}

std::size_t ParameterSet::add_zeros(std::string name, std::vector<std::size_t> shape) {
  return add(std::move(name), Tensor(std::move(shape)));
}

std::size_t ParameterSet::scalar_count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += p.value.size();
  return n;
}

const Parameter* ParameterSet::find(const std::string& name) const {
  for (const auto& p : params_)
    if (p.name == name) return &p;
  return nullptr;
}

Parameter* ParameterSet::find(const std::string& name) {
  for (auto& p : params_)
    if (p.name == name) return &p;
  return nullptr;
}

void ParameterSet::zero_grad() {
  for (auto& p : params_) p.grad.fill(0.0);
}

void ParameterSet::reset_ema() {
  for (auto& p : params_) p.ema = p.value;
}

void ema_update(ParameterSet& params, double decay) {
  TDCR_REQUIRE(decay >= 0.0 && decay <= 1.0, "EMA decay must lie in [0, 1]");
  for (auto& p : params) {
    double* ema = p.ema.data();
    const double* v = p.value.data();
    for (std::size_t i = 0; i < p.value.size(); ++i) {
      const double lo = std::min(ema[i], v[i]);
      const double hi = std::max(ema[i], v[i]);
      // Rounding may push the blend an ulp outside the segment.
      ema[i] = std::clamp(decay * ema[i] + (1.0 - decay) * v[i], lo, hi);
    }
  }
}

}  // namespace tdcr::num

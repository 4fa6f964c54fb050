#include "tdcrflow/numerics/optimizer.hpp"

#include <cmath>

#include "tdcrflow/common/error.hpp"

namespace tdcr::num {

void Adam::init(const ParameterSet& params) {
  TDCR_REQUIRE(cfg_.learning_rate > 0.0, "Adam: learning rate must be positive");
  TDCR_REQUIRE(cfg_.beta1 >= 0.0 && cfg_.beta1 < 1.0 && cfg_.beta2 >= 0.0 && cfg_.beta2 < 1.0,
               "Adam: decay coefficients must lie in [0, 1)");
  first_.clear();
  second_.clear();
  for (const auto& p : params) {
    first_.emplace_back(p.value.shape());
    second_.emplace_back(p.value.shape());
  }
  steps_ = 0;
  initialized_ = true;
}

void Adam::step(ParameterSet& params) {
  TDCR_REQUIRE(initialized_, "Adam::step before init()");
  TDCR_REQUIRE(params.size() == first_.size(), "Adam: parameter set changed since init()");
  ++steps_;
  const double b1 = cfg_.beta1, b2 = cfg_.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(steps_));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(steps_));
  for (std::size_t k = 0; k < params.size(); ++k) {
    Parameter& p = params[k];
    TDCR_REQUIRE(p.value.same_shape(first_[k]), "Adam: parameter shape changed since init()");
    double* w = p.value.data();
    const double* g = p.grad.data();
    double* m = first_[k].data();
    double* v = second_[k].data();
    for (std::size_t i = 0; i < p.value.size(); ++i) {
      m[i] = b1 * m[i] + (1.0 - b1) * g[i];
      v[i] = b2 * v[i] + (1.0 - b2) * g[i] * g[i];
      const double mhat = m[i] / c1;
      const double vhat = v[i] / c2;
      w[i] -= cfg_.learning_rate * mhat / (std::sqrt(vhat) + cfg_.epsilon);
    }
  }
}

}  // namespace tdcr::num

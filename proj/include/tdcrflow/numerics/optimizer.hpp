#pragma once

#include <cstdint>
#include <vector>

#include "tdcrflow/numerics/parameter.hpp"

namespace tdcr::num {

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

// Adaptive-moment optimizer with bias correction. Reads Parameter::grad and
// leaves it untouched; callers zero gradients before the next step.
class Adam {
 public:
  explicit Adam(AdamConfig cfg = {}) : cfg_(cfg) {}

  void init(const ParameterSet& params);
  void step(ParameterSet& params);

  bool initialized() const { return initialized_; }
  std::uint64_t step_count() const { return steps_; }
  const AdamConfig& config() const { return cfg_; }
  void set_learning_rate(double lr) { cfg_.learning_rate = lr; }

 private:
  AdamConfig cfg_;
  std::vector<Tensor> first_;
  std::vector<Tensor> second_;
  std::uint64_t steps_ = 0;
  bool initialized_ = false;
};

}  // namespace tdcr::num

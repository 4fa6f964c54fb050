#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "tdcrflow/common/rng.hpp"
#include "tdcrflow/numerics/tensor.hpp"

namespace tdcr::num {

// Trainable tensor with its gradient and exponential moving average.
struct Parameter {
  std::string name;
  Tensor value;
  Tensor grad;
  Tensor ema;
};

// Which copy of the weights a forward pass reads.
enum class Weights { live, ema };

// Ordered collection of parameters. Order is the serialization order, so
// networks must register parameters deterministically.
class ParameterSet {
 public:
  // Returns the index of the new parameter; indices stay valid for the
  // lifetime of the set.
  std::size_t add(std::string name, Tensor init);

  // Uniform(-bound, bound) with bound = gain * sqrt(6 / (fan_in + fan_out)).
  std::size_t add_glorot(std::string name, std::size_t fan_in, std::size_t fan_out, Rng& rng,
                         double gain = 1.0);
  std::size_t add_zeros(std::string name, std::vector<std::size_t> shape);

  Parameter& operator[](std::size_t i) { return params_[i]; }
  const Parameter& operator[](std::size_t i) const { return params_[i]; }
  std::size_t size() const { return params_.size(); }
  std::size_t scalar_count() const;

  auto begin() { return params_.begin(); }
  auto end() { return params_.end(); }
  auto begin() const { return params_.begin(); }
  auto end() const { return params_.end(); }

  const Parameter* find(const std::string& name) const;
  Parameter* find(const std::string& name);

  void zero_grad();
  void reset_ema();  // ema <- value

 private:
  std::vector<Parameter> params_;
};

// ema <- decay * ema + (1 - decay) * value, elementwise; decay in [0, 1].
void ema_update(ParameterSet& params, double decay);

}  // namespace tdcr::num

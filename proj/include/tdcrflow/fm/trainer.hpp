#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <vector>

#include <json.hpp>

#include "tdcrflow/nets/velocity.hpp"
#include "tdcrflow/numerics/optimizer.hpp"
#include "tdcrflow/numerics/tensor.hpp"

namespace tdcr::fm {

struct TrainConfig {
  double alpha = 3.0;
  double sigma = 0.5;
  double lambda_rgb = 0.05;
  std::size_t epochs = 500;
  std::size_t steps = 0;          // when > 0, overrides epochs with a step budget
  std::size_t batch = 16;
  double learning_rate = 1e-3;
  double ema_decay = 0.999;
  std::uint64_t seed = 0;
  std::size_t sample_steps = 100;  // evaluation sampling
  std::size_t val_steps = 50;
  std::size_t val_every = 10;      // epochs
  std::size_t val_samples = 8;
  std::size_t micro_batch_rows = 16384;  // rows per forward pass; gradients accumulate

  void validate() const;
  nlohmann::json to_json() const;
  static TrainConfig from_json(const nlohmann::json& j);
};

// Normalized training data: clouds are N x d in normalized units, conditions
// in [0, 1].
struct TrainData {
  std::vector<num::Tensor> clouds;
  std::vector<std::vector<double>> conditions;
  std::vector<std::size_t> train, val;
  double scale = 1.0;  // for metric-scale validation CD

  std::size_t points() const { return clouds.empty() ? 0 : clouds.front().rows(); }
  std::size_t channels() const { return clouds.empty() ? 0 : clouds.front().cols(); }
};

struct EpochRecord {
  std::size_t epoch = 0;  // 1-based
  double mean_loss = 0.0;
  double val_cd = std::numeric_limits<double>::quiet_NaN();  // metric scale when computed
};

struct TrainResult {
  std::vector<EpochRecord> trace;
  std::size_t steps = 0;
  std::size_t best_epoch = 0;
  double best_val_cd = std::numeric_limits<double>::quiet_NaN();
};

// Decay used at optimizer step n (0-based): min(decay, (1 + n) / (10 + n)).
double ema_decay_at(double decay, std::uint64_t step);

// One optimizer step on an explicit batch (sample ids into data). Returns
// the batch loss.
double train_step(nets::VelocityNet& net, num::Adam& opt, const TrainData& data,
                  const std::vector<std::size_t>& batch, const TrainConfig& cfg, Rng& rng);

// Runs the training loop. On return the network's EMA weights hold the
// snapshot with the best validation CD (or the final EMA when there is no
// validation split); live weights are the final ones.
TrainResult train(nets::VelocityNet& net, const TrainData& data, const TrainConfig& cfg,
                  const std::function<void(const EpochRecord&)>& on_epoch = {});

// Mean metric-scale chamfer of EMA samples against the validation clouds.
double validation_cd(const nets::VelocityNet& net, const TrainData& data, const TrainConfig& cfg);

}  // namespace tdcr::fm

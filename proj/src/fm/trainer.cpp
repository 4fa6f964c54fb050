#include "tdcrflow/fm/trainer.hpp"

#include <algorithm>
#include <cmath>

#include "tdcrflow/common/error.hpp"
#include "tdcrflow/fm/flow.hpp"
#include "tdcrflow/metrics/distances.hpp"

namespace tdcr::fm {

void TrainConfig::validate() const {
  TDCR_REQUIRE(alpha > 0.0, "alpha must be positive");
  TDCR_REQUIRE(sigma > 0.0, "sigma must be positive");
  TDCR_REQUIRE(lambda_rgb >= 0.0, "lambda_rgb must be non-negative");
  TDCR_REQUIRE(epochs >= 1 || steps >= 1, "need at least one epoch");
  TDCR_REQUIRE(batch >= 1, "batch size must be positive");
  TDCR_REQUIRE(learning_rate > 0.0, "learning rate must be positive");
  TDCR_REQUIRE(ema_decay >= 0.0 && ema_decay <= 1.0, "ema decay must lie in [0, 1]");
  TDCR_REQUIRE(sample_steps >= 1 && val_steps >= 1, "sampling steps must be positive");
  TDCR_REQUIRE(val_every >= 1, "validation cadence must be positive");
  TDCR_REQUIRE(micro_batch_rows >= 1, "micro batch must be positive");
}

nlohmann::json TrainConfig::to_json() const {
  return {{"alpha", alpha},
          {"sigma", sigma},
          {"lambda_rgb", lambda_rgb},
          {"epochs", epochs},
          {"steps", steps},
          {"batch", batch},
          {"learning_rate", learning_rate},
          {"ema_decay", ema_decay},
          {"seed", seed},
          {"sample_steps", sample_steps},
          {"val_steps", val_steps},
          {"val_every", val_every},
          {"val_samples", val_samples},
          {"micro_batch_rows", micro_batch_rows}};
}

TrainConfig TrainConfig::from_json(const nlohmann::json& j) {
  TrainConfig c;
  c.alpha = j.at("alpha").get<double>();
  c.sigma = j.at("sigma").get<double>();
  c.lambda_rgb = j.at("lambda_rgb").get<double>();
  c.epochs = j.at("epochs").get<std::size_t>();
  c.steps = j.at("steps").get<std::size_t>();
  c.batch = j.at("batch").get<std::size_t>();
  c.learning_rate = j.at("learning_rate").get<double>();
  c.ema_decay = j.at("ema_decay").get<double>();
  c.seed = j.at("seed").get<std::uint64_t>();
  c.sample_steps = j.at("sample_steps").get<std::size_t>();
  c.val_steps = j.at("val_steps").get<std::size_t>();
  c.val_every = j.at("val_every").get<std::size_t>();
  c.val_samples = j.at("val_samples").get<std::size_t>();
  c.micro_batch_rows = j.at("micro_batch_rows").get<std::size_t>();
  c.validate();
  return c;
}

double ema_decay_at(double decay, std::uint64_t step) {
  const double n = static_cast<double>(step);
  return std::min(decay, (1.0 + n) / (10.0 + n));
}

double train_step(nets::VelocityNet& net, num::Adam& opt, const TrainData& data,
                  const std::vector<std::size_t>& batch, const TrainConfig& cfg, Rng& rng) {
  const std::size_t n = data.points(), d = data.channels(), width = net.condition_width();
  const std::size_t per_chunk = std::max<std::size_t>(1, cfg.micro_batch_rows / std::max<std::size_t>(n, 1));

  // Draw every random quantity up front so the result does not depend on
  // the micro-batch split.
  std::vector<double> times(batch.size());
  std::vector<num::Tensor> priors(batch.size());
  for (std::size_t b = 0; b < batch.size(); ++b) {
    times[b] = sample_time(cfg.alpha, rng);
    priors[b] = sample_prior(n, d, cfg.sigma, rng);
  }

  net.params().zero_grad();
  double loss = 0.0;
  for (std::size_t start = 0; start < batch.size(); start += per_chunk) {
    const std::size_t count = std::min(per_chunk, batch.size() - start);
    nets::FlowInput in;
    in.points = n;
    in.x = num::Tensor::matrix(count * n, d);
    in.c = num::Tensor::matrix(count, width);
    num::Tensor target = num::Tensor::matrix(count * n, d);
    for (std::size_t k = 0; k < count; ++k) {
      const std::size_t b = start + k, id = batch[b];
      TDCR_REQUIRE(data.conditions[id].size() == width, "condition width does not match the network");
      auto [xt, u] = interpolate(priors[b], data.clouds[id], times[b]);
      std::copy(xt.values().begin(), xt.values().end(), in.x.data() + k * n * d);
      std::copy(u.values().begin(), u.values().end(), target.data() + k * n * d);
      std::copy(data.conditions[id].begin(), data.conditions[id].end(), in.c.row(k).begin());
      in.t.push_back(times[b]);
    }
    num::Graph g;
    num::Var pred = net.forward(g, in, num::Weights::live);
    num::Var l = fm_loss(pred, g.constant(std::move(target)), d, cfg.lambda_rgb);
    // Chunks are equal-sized clouds, so weighting by sample share gives the
    // full-batch mean.
    const double share = static_cast<double>(count) / static_cast<double>(batch.size());
    loss += g.backward(num::scale(l, share));
  }
  opt.step(net.params());
  num::ema_update(net.params(), ema_decay_at(cfg.ema_decay, opt.step_count() - 1));
  return loss;
}

double validation_cd(const nets::VelocityNet& net, const TrainData& data, const TrainConfig& cfg) {
  const std::size_t count = std::min(cfg.val_samples, data.val.size());
  TDCR_REQUIRE(count > 0, "validation_cd: empty validation split");
  const double s2 = data.scale * data.scale;
  double acc = 0.0;
  for (std::size_t i = 0; i < count; ++i) {
    const std::size_t id = data.val[i];
    // Fixed noise per validation sample keeps epochs comparable.
    Rng rng = Rng::stream(cfg.seed ^ 0x5eedULL, id);
    const num::Tensor pred = sample_shape(net, data.conditions[id], data.points(), cfg.val_steps, cfg.sigma, rng);
    std::vector<metrics::Point3> p(pred.rows()), q(data.points());
    for (std::size_t r = 0; r < pred.rows(); ++r) p[r] = {pred(r, 0), pred(r, 1), pred(r, 2)};
    const num::Tensor& gt = data.clouds[id];
    for (std::size_t r = 0; r < gt.rows(); ++r) q[r] = {gt(r, 0), gt(r, 1), gt(r, 2)};
    acc += metrics::chamfer(p, q) * s2;
  }
  return acc / static_cast<double>(count);
}

TrainResult train(nets::VelocityNet& net, const TrainData& data, const TrainConfig& cfg,
                  const std::function<void(const EpochRecord&)>& on_epoch) {
  cfg.validate();
  TDCR_REQUIRE(!data.train.empty(), "train: empty training split");
  TDCR_REQUIRE(data.channels() == net.channels(), "train: point width does not match the network");
  for (std::size_t id : data.train)
    TDCR_REQUIRE(data.conditions[id].size() == net.condition_width(),
                 "train: dataset condition width " + std::to_string(data.conditions[id].size()) +
                     " does not match the network's " + std::to_string(net.condition_width()));

  num::Adam opt({cfg.learning_rate});
  opt.init(net.params());
  net.params().reset_ema();
  Rng rng(cfg.seed);

  const std::size_t n_train = data.train.size();
  const std::size_t steps_per_epoch = std::max<std::size_t>(1, (n_train + cfg.batch - 1) / cfg.batch);
  const std::size_t total_steps = cfg.steps > 0 ? cfg.steps : cfg.epochs * steps_per_epoch;
  const std::size_t epochs = (total_steps + steps_per_epoch - 1) / steps_per_epoch;
  const bool validate = !data.val.empty() && cfg.val_samples > 0;

  TrainResult res;
  std::vector<num::Tensor> best_ema;
  std::vector<std::size_t> order(data.train);
  std::size_t step = 0;
  for (std::size_t epoch = 1; epoch <= epochs; ++epoch) {
    // Fisher-Yates shuffle; batches wrap around when the split is smaller
    // than the batch.
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
    double loss_sum = 0.0;
    std::size_t loss_count = 0;
    for (std::size_t s = 0; s < steps_per_epoch && step < total_steps; ++s, ++step) {
      std::vector<std::size_t> batch(cfg.batch);
      for (std::size_t b = 0; b < cfg.batch; ++b) batch[b] = order[(s * cfg.batch + b) % order.size()];
      double loss;
      try {
        loss = train_step(net, opt, data, batch, cfg, rng);
      } catch (const NumericError& e) {
        throw NumericError("training diverged at step " + std::to_string(step) + ": " + e.what());
      }
      if (!std::isfinite(loss)) throw NumericError("non-finite loss at step " + std::to_string(step));
      loss_sum += loss;
      ++loss_count;
    }
    EpochRecord rec;
    rec.epoch = epoch;
    rec.mean_loss = loss_sum / static_cast<double>(std::max<std::size_t>(loss_count, 1));
    if (validate && (epoch % cfg.val_every == 0 || epoch == epochs)) {
      rec.val_cd = validation_cd(net, data, cfg);
      if (std::isnan(res.best_val_cd) || rec.val_cd < res.best_val_cd) {
        res.best_val_cd = rec.val_cd;
        res.best_epoch = epoch;
        best_ema.clear();
        for (const auto& p : net.params()) best_ema.push_back(p.ema);
      }
    }
    res.trace.push_back(rec);
    if (on_epoch) on_epoch(rec);
  }
  res.steps = step;
  if (!best_ema.empty()) {
    std::size_t i = 0;
    for (auto& p : net.params()) p.ema = best_ema[i++];
  } else {
    res.best_epoch = epochs;
  }
  return res;
}

}  // namespace tdcr::fm

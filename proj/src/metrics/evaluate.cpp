#include "tdcrflow/metrics/evaluate.hpp"

#include "tdcrflow/common/error.hpp"
#include "tdcrflow/common/rng.hpp"
#include "tdcrflow/metrics/distances.hpp"

namespace tdcr::metrics {

PairMetrics evaluate_pair(const pc::PointCloud& pred, const pc::PointCloud& gt, double scale,
                          const EvalConfig& cfg, std::uint64_t pred_seed, std::uint64_t gt_seed) {
  TDCR_REQUIRE(!pred.empty() && !gt.empty(), "evaluate: empty cloud");
  TDCR_REQUIRE(cfg.n_eval >= 1, "evaluate: n_eval must be at least 1");
  const auto p = xyz_of(pc::resample_to_count(pc::denormalize_points(pred, scale), cfg.n_eval, pred_seed));
  const auto g = xyz_of(pc::resample_to_count(pc::denormalize_points(gt, scale), cfg.n_eval, gt_seed));
  PairMetrics out;
  out.cd = chamfer(p, g);
  out.emd_exact = cfg.n_eval <= cfg.exact_cap;
  out.emd = out.emd_exact ? emd_exact(p, g, cfg.exact_cap) : emd_approx(p, g, cfg.auction_epsilon);
  return out;
}

PairMetrics evaluate(const pc::PointCloud& pred, const pc::PointCloud& gt, double scale,
                     const EvalConfig& cfg, std::uint64_t seed) {
  return evaluate_pair(pred, gt, scale, cfg, Rng::stream(seed, 0).next_u64(), Rng::stream(seed, 1).next_u64());
}

double MetricsReport::mean_cd() const {
  if (samples.empty()) return 0.0;
  double acc = 0.0;
  for (const auto& s : samples) acc += s.cd;
  return acc / static_cast<double>(samples.size());
}

double MetricsReport::mean_emd() const {
  if (samples.empty()) return 0.0;
  double acc = 0.0;
  for (const auto& s : samples) acc += s.emd;
  return acc / static_cast<double>(samples.size());
}

nlohmann::json MetricsReport::to_json() const {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& s : samples)
    rows.push_back({{"index", s.index},
                    {"cd", s.cd},
                    {"emd", s.emd},
                    {"cd_x1e4", s.cd * kCdPresentationFactor},
                    {"emd_x1e3", s.emd * kEmdPresentationFactor}});
  nlohmann::json j;
  j["split"] = split;
  j["mode"] = mode;
  j["n_eval"] = n_eval;
  j["seed"] = seed;
  j["emd_method"] = emd_exact ? "exact" : "auction";
  if (!emd_exact) j["auction_epsilon"] = auction_epsilon;
  j["samples"] = rows;
  j["count"] = samples.size();
  j["mean_cd"] = mean_cd();
  j["mean_emd"] = mean_emd();
  j["mean_cd_x1e4"] = mean_cd() * kCdPresentationFactor;
  j["mean_emd_x1e3"] = mean_emd() * kEmdPresentationFactor;
  return j;
}

}  // namespace tdcr::metrics

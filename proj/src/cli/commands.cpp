#include "tdcrflow/cli/commands.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <ostream>
#include <sstream>

#include "tdcrflow/cli/bundle.hpp"
#include "tdcrflow/common/error.hpp"
#include "tdcrflow/common/parallel.hpp"
#include "tdcrflow/common/rng.hpp"
#include "tdcrflow/fm/flow.hpp"
#include "tdcrflow/nets/velocity.hpp"
#include "tdcrflow/numerics/checkpoint.hpp"
#include "tdcrflow/pointcloud/io.hpp"

namespace tdcr::cli {
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string num_text(double v) {
  char buf[32];
  auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

json with_command(const char* name, json body) {
  return {{"command", name}, {"tool_version", kToolVersion}, {"options", std::move(body)}};
}

void write_sidecar(const fs::path& output, const json& run_config) {
  write_file(fs::path(output.string() + ".run.json"), json{{"output", output.filename().string()},
                                                          {"run_config", run_config}}
                                                              .dump(2) +
                                                          "\n");
}

void ensure_parent(const fs::path& p) {
  if (!p.has_parent_path()) return;
  std::error_code ec;
  fs::create_directories(p.parent_path(), ec);
  if (ec) throw IoError("cannot create " + p.parent_path().string() + ": " + ec.message());
}

// Sampler output in metric units; colors leave the network unconstrained.
pc::PointCloud to_metric_cloud(const num::Tensor& x, double scale) {
  pc::PointCloud cloud = pc::PointCloud::from_tensor(x, "base");
  if (cloud.has_color())
    for (std::size_t i = 0; i < cloud.size(); ++i)
      for (std::size_t c = 3; c < 6; ++c) cloud(i, c) = std::clamp(cloud(i, c), 0.0, 1.0);
  return pc::denormalize_points(cloud, scale);
}

struct LoadedModel {
  std::unique_ptr<nets::VelocityNet> net;
  json manifest;
  pc::NormalizationStats stats;
};

LoadedModel load_model(const fs::path& path) {
  num::CheckpointData ck = num::read_checkpoint(path);
  LoadedModel m;
  try {
    if (ck.manifest.value("format", "") != "tdcrflow-model")
      throw FormatError(path.string() + " is not a tdcrflow model checkpoint");
    m.stats = stats_from_json(ck.manifest.at("stats"));
  } catch (const json::exception& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
  m.net = nets::network_from_manifest(ck.manifest, ck.params);
  m.manifest = std::move(ck.manifest);
  return m;
}

const std::vector<std::size_t>& split_of(const synth::Dataset& ds, const std::string& name) {
  if (name == "train") return ds.split.train;
  if (name == "val") return ds.split.val;
  if (name == "test") return ds.split.test;
  throw Refusal("unknown split '" + name + "' (expected train, val or test)");
}

}  // namespace

std::vector<double> parse_condition(const std::string& text) {
  std::vector<double> out;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t end = std::min(text.find(',', pos), text.size());
    std::string item = text.substr(pos, end - pos);
    item.erase(0, item.find_first_not_of(" \t"));
    item.erase(item.find_last_not_of(" \t") + 1);
    double v = 0.0;
    const auto r = std::from_chars(item.data(), item.data() + item.size(), v);
    if (item.empty() || r.ec != std::errc() || r.ptr != item.data() + item.size())
      throw ContractViolation("condition entry '" + item + "' is not a number");
    out.push_back(v);
    pos = end + 1;
  }
  return out;
}

json GenOptions::to_json() const {
  json j{{"robot", robot.to_json()}, {"samples", samples}, {"points", points}, {"seed", seed},
         {"include_base", include_base}, {"color", color}, {"voxel", voxel}, {"out", out.string()}};
  j["payload_max"] = payload_max ? json(*payload_max) : json(nullptr);
  return j;
}

fs::path TrainOptions::loss_path() const { return loss_csv ? *loss_csv : fs::path(out.string() + ".loss.csv"); }

json TrainOptions::to_json() const {
  return {{"data", data.string()},
          {"out", out.string()},
          {"loss_csv", loss_path().string()},
          {"init", init ? json(init->string()) : json(nullptr)},
          {"network", net.to_json()},
          {"train", train.to_json()}};
}

json SampleOptions::to_json() const {
  return {{"checkpoint", checkpoint.string()}, {"out", out.string()}, {"condition", condition},
          {"raw", raw}, {"steps", steps}, {"points", points}, {"seed", seed}};
}

json EvalOptions::to_json() const {
  return {{"checkpoint", checkpoint ? json(checkpoint->string()) : json(nullptr)},
          {"data", data.string()},
          {"out", out.string()},
          {"split", split},
          {"baseline", baseline ? json(*baseline) : json(nullptr)},
          {"n_eval", metrics.n_eval},
          {"exact_cap", metrics.exact_cap},
          {"auction_epsilon", metrics.auction_epsilon},
          {"steps", steps},
          {"seed", seed}};
}

json WorkspaceOptions::to_json() const {
  return {{"robot", robot.to_json()}, {"sweep", sweep}, {"seed", seed}, {"out", out.string()}};
}

void run_gen(const GenOptions& opt, std::ostream& log) {
  if (opt.robot.modules != 2 && opt.robot.modules != 3 && opt.robot.modules != 5)
    throw ContractViolation("--modules must be 2, 3 or 5");
  opt.robot.validate();
  if (opt.out.empty()) throw ContractViolation("--out is required");
  std::error_code ec;
  if (fs::exists(opt.out, ec) && !fs::is_empty(opt.out, ec) && !opt.force)
    throw Refusal(opt.out.string() + " exists and is not empty; pass --force to overwrite");

  synth::GenConfig cfg;
  cfg.samples = opt.samples;
  cfg.points = opt.points;
  cfg.seed = opt.seed;
  cfg.payload_max = opt.payload_max;
  cfg.include_base = opt.include_base;
  cfg.color = opt.color;
  cfg.voxel = opt.voxel;
  const synth::Dataset ds = synth::generate_dataset(opt.robot, cfg);
  write_bundle(opt.out, ds, with_command("gen", opt.to_json()));
  log << "wrote " << ds.size() << " samples (" << ds.split.train.size() << "/" << ds.split.val.size() << "/"
      << ds.split.test.size() << " train/val/test), condition width " << ds.condition_width() << " to "
      << opt.out.string() << "\n";
}

fm::TrainResult run_train(const TrainOptions& opt, std::ostream& log) {
  if (opt.out.empty()) throw ContractViolation("--out is required");
  opt.train.validate();
  const Bundle bundle = read_bundle(opt.data);
  const synth::Dataset& ds = bundle.dataset;

  std::unique_ptr<nets::VelocityNet> net;
  if (opt.init) {
    LoadedModel m = load_model(*opt.init);
    if (m.net->condition_width() != ds.condition_width())
      throw Refusal("checkpoint condition width " + std::to_string(m.net->condition_width()) +
                    " does not match the dataset's " + std::to_string(ds.condition_width()));
    if (m.net->channels() != ds.channels())
      throw Refusal("checkpoint point width " + std::to_string(m.net->channels()) +
                    " does not match the dataset's " + std::to_string(ds.channels()));
    net = std::move(m.net);
    log << "warm start from " << opt.init->string() << "\n";
  } else {
    nets::NetConfig cfg = opt.net;
    cfg.channels = ds.channels();
    cfg.condition_width = ds.condition_width();
    net = nets::make_network(cfg, opt.train.seed);
  }

  const fm::TrainData data = to_train_data(ds);
  const fm::TrainResult res = fm::train(*net, data, opt.train, [&](const fm::EpochRecord& r) {
    if (!std::isnan(r.val_cd)) log << "epoch " << r.epoch << " loss " << r.mean_loss << " val_cd " << r.val_cd << "\n";
  });

  const json run_config = with_command("train", opt.to_json());
  json manifest = nets::network_manifest(*net);
  manifest["format"] = "tdcrflow-model";
  manifest["train"] = opt.train.to_json();
  manifest["stats"] = stats_to_json(ds.stats);
  manifest["robot"] = ds.spec.to_json();
  manifest["points"] = data.points();
  manifest["payload"] = ds.config.payload_max.has_value();
  manifest["steps"] = res.steps;
  manifest["best_epoch"] = res.best_epoch;
  manifest["best_val_cd"] = std::isnan(res.best_val_cd) ? json(nullptr) : json(res.best_val_cd);
  manifest["run_config"] = run_config;
  ensure_parent(opt.out);
  num::write_checkpoint(opt.out, manifest, net->params());

  std::ostringstream csv;
  csv << "epoch,mean_loss,val_cd\n";
  for (const auto& r : res.trace)
    csv << r.epoch << "," << num_text(r.mean_loss) << "," << (std::isnan(r.val_cd) ? "" : num_text(r.val_cd)) << "\n";
  const fs::path loss = opt.loss_path();
  ensure_parent(loss);
  write_file(loss, csv.str());
  write_sidecar(loss, run_config);
  log << "trained " << res.steps << " steps; checkpoint " << opt.out.string() << "\n";
  return res;
}

void run_sample(const SampleOptions& opt, std::ostream& log) {
  if (opt.out.empty()) throw ContractViolation("--out is required");
  if (opt.steps == 0) throw ContractViolation("--steps must be positive");
  LoadedModel m = load_model(opt.checkpoint);
  const std::size_t width = m.net->condition_width();
  if (opt.condition.size() != width)
    throw Refusal("condition has " + std::to_string(opt.condition.size()) + " entries, the model expects " +
                  std::to_string(width));

  std::vector<double> c;
  bool clamped = false;
  if (opt.raw) {
    const std::size_t dims = m.stats.motor_min.size();
    std::optional<double> payload;
    if (m.stats.has_payload()) payload = opt.condition[dims];
    auto n = pc::normalize_condition(std::span<const double>(opt.condition.data(), dims), payload, m.stats);
    c = std::move(n.values);
    clamped = n.clamped;
  } else {
    for (double v : opt.condition) {
      if (!std::isfinite(v)) throw ContractViolation("condition entries must be finite");
      const double u = std::clamp(v, 0.0, 1.0);
      clamped = clamped || u != v;
      c.push_back(u);
    }
  }
  if (clamped) log << "warning: condition outside the training range was clamped\n";

  const std::size_t points = opt.points ? opt.points : m.manifest.at("points").get<std::size_t>();
  const double sigma = m.manifest.at("train").at("sigma").get<double>();
  Rng rng(opt.seed);
  const num::Tensor x = fm::sample_shape(*m.net, c, points, opt.steps, sigma, rng);
  const pc::PointCloud cloud = to_metric_cloud(x, m.stats.scale);

  ensure_parent(opt.out);
  pc::write_point_cloud(opt.out, cloud,
                        {std::string("tdcrflow sample ") + kToolVersion,
                         "run_config " + with_command("sample", opt.to_json()).dump()});
  log << "wrote " << cloud.size() << " points to " << opt.out.string() << "\n";
}

pc::PointCloud mean_shape(const synth::Dataset& ds, std::uint64_t seed) {
  TDCR_REQUIRE(!ds.split.train.empty(), "mean-shape baseline needs a training split");
  pc::PointCloud all(ds.channels(), {}, "base");
  for (std::size_t id : ds.split.train) {
    const pc::PointCloud n = pc::normalize_points(ds.clouds[id], ds.stats.scale);
    all.data().insert(all.data().end(), n.data().begin(), n.data().end());
  }
  return pc::resample_to_count(all, ds.clouds.front().size(), seed);
}

metrics::MetricsReport run_eval(const EvalOptions& opt, std::ostream& log) {
  if (opt.out.empty()) throw ContractViolation("--out is required");
  if (opt.baseline && *opt.baseline != "mean-shape")
    throw ContractViolation("unknown baseline '" + *opt.baseline + "' (expected mean-shape)");
  if (!opt.baseline && !opt.checkpoint) throw ContractViolation("--checkpoint is required unless --baseline is given");
  if (opt.metrics.n_eval == 0) throw ContractViolation("--neval must be positive");

  const Bundle bundle = read_bundle(opt.data);
  const synth::Dataset& ds = bundle.dataset;
  const std::vector<std::size_t>& ids = split_of(ds, opt.split);
  if (ids.empty()) throw Refusal("split '" + opt.split + "' is empty in " + opt.data.string());

  std::optional<LoadedModel> model;
  pc::PointCloud constant;
  if (opt.baseline) {
    constant = mean_shape(ds, Rng::stream(opt.seed, 0x6d65616eULL).next_u64());
  } else {
    model = load_model(*opt.checkpoint);
    if (model->net->condition_width() != ds.condition_width() || model->net->channels() != ds.channels())
      throw Refusal("checkpoint does not match the dataset's condition or point width");
  }

  metrics::MetricsReport report;
  report.split = opt.split;
  report.mode = opt.baseline ? *opt.baseline : "model";
  report.n_eval = opt.metrics.n_eval;
  report.seed = opt.seed;
  report.emd_exact = opt.metrics.n_eval <= opt.metrics.exact_cap;
  report.auction_epsilon = opt.metrics.auction_epsilon;
  report.samples.resize(ids.size());

  const double sigma = model ? model->manifest.at("train").at("sigma").get<double>() : 0.0;
  parallel_for(ids.size(), [&](std::size_t k) {
    const std::size_t id = ids[k];
    const pc::PointCloud gt = pc::normalize_points(ds.clouds[id], ds.stats.scale);
    pc::PointCloud pred;
    if (model) {
      Rng rng = Rng::stream(opt.seed, id);
      const num::Tensor x = fm::sample_shape(*model->net, normalized_condition(ds, id), gt.size(), opt.steps, sigma, rng);
      pred = pc::PointCloud::from_tensor(x, "base");
    } else {
      pred = constant;
    }
    const metrics::PairMetrics pm =
        metrics::evaluate(pred, gt, ds.stats.scale, opt.metrics, Rng::stream(opt.seed ^ 0xe7a1ULL, id).next_u64());
    report.samples[k] = {id, pm.cd, pm.emd};
  });

  json j = report.to_json();
  j["run_config"] = with_command("eval", opt.to_json());
  ensure_parent(opt.out);
  write_file(opt.out, j.dump(2) + "\n");
  log << report.mode << " on " << opt.split << " (" << ids.size() << " samples): CD x1e4 "
      << report.mean_cd() * metrics::kCdPresentationFactor << ", EMD x1e3 "
      << report.mean_emd() * metrics::kEmdPresentationFactor << "\n";
  return report;
}

void run_workspace(const WorkspaceOptions& opt, std::ostream& log) {
  if (opt.out.empty()) throw ContractViolation("--out is required");
  opt.robot.validate();
  const synth::Workspace ws = synth::workspace_projection(opt.robot, opt.sweep, opt.seed);
  std::ostringstream csv;
  csv << "y,z\n";
  for (const auto& p : ws.tips) csv << num_text(p[0]) << "," << num_text(p[1]) << "\n";
  csv << "boundary\n";
  for (const auto& p : ws.boundary) csv << num_text(p[0]) << "," << num_text(p[1]) << "\n";
  ensure_parent(opt.out);
  write_file(opt.out, csv.str());
  write_sidecar(opt.out, with_command("workspace", opt.to_json()));
  log << "wrote " << ws.tips.size() << " tips and a " << ws.boundary.size() << "-vertex boundary to "
      << opt.out.string() << "\n";
}

}  // namespace tdcr::cli

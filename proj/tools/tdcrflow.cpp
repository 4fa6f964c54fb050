#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "tdcrflow/cli/commands.hpp"
#include "tdcrflow/common/error.hpp"

namespace {

using namespace tdcr;

int fail(const std::string& category, std::string message) {
  for (char& ch : message)
    if (ch == '\n' || ch == '\r') ch = ' ';
  std::cerr << "error: " << category << ": " << message << "\n";
  return category == "usage" ? 2 : 1;
}

void robot_flags(CLI::App* app, synth::RobotSpec& r) {
  app->add_option("--modules", r.modules, "number of modules")->capture_default_str();
  app->add_option("--module-length", r.module_length, "module length (m)")->capture_default_str();
  app->add_option("--tendon-radius", r.tendon_radius, "tendon routing radius (m)")->capture_default_str();
  app->add_option("--disc-radius", r.disc_radius, "spacer disc radius (m)")->capture_default_str();
  app->add_option("--tube-radius", r.tube_radius, "backbone tube radius (m)")->capture_default_str();
  app->add_option("--discs", r.discs_per_module, "discs per module")->capture_default_str();
  app->add_option("--max-displacement", r.max_displacement, "tendon travel limit (m)")->capture_default_str();
  app->add_option("--payload-compliance", r.payload_compliance, "tip-load bending (rad/kg/module)")
      ->capture_default_str();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Action-conditioned flow matching for continuum robot shapes"};
  app.set_version_flag("--version", std::string(cli::kToolVersion));
  app.require_subcommand(1);

  cli::GenOptions gen;
  auto* g = app.add_subcommand("gen", "generate a synthetic dataset bundle");
  robot_flags(g, gen.robot);
  g->add_option("--samples", gen.samples, "number of configurations K")->capture_default_str();
  g->add_option("--points", gen.points, "points per cloud")->capture_default_str();
  g->add_option("--seed", gen.seed)->capture_default_str();
  g->add_flag("--with-base,!--no-base", gen.include_base, "sample the fixed base cylinder");
  g->add_flag("--color", gen.color, "add per-disc RGB channels");
  g->add_option("--payload-max", gen.payload_max, "enable payload conditioning up to this mass (kg)");
  g->add_option("--voxel", gen.voxel, "downsampling voxel edge (m)")->capture_default_str();
  g->add_option("--out", gen.out, "output directory")->required();
  g->add_flag("--force", gen.force, "overwrite a non-empty output directory");

  cli::TrainOptions tr;
  auto* t = app.add_subcommand("train", "train a velocity network on a bundle");
  t->add_option("--data", tr.data, "dataset bundle directory")->required();
  t->add_option("--out", tr.out, "checkpoint file")->required();
  t->add_option("--loss-csv", tr.loss_csv, "loss trace (default <out>.loss.csv)");
  t->add_option("--init", tr.init, "warm-start checkpoint");
  t->add_option("--arch", tr.net.arch, "mlp or hybrid")->check(CLI::IsMember({"mlp", "hybrid"}))->capture_default_str();
  t->add_option("--width", tr.net.width)->capture_default_str();
  t->add_option("--blocks", tr.net.blocks)->capture_default_str();
  t->add_option("--embed-width", tr.net.embed_width)->capture_default_str();
  t->add_option("--alpha", tr.train.alpha, "Beta(alpha, 1) time shape")->capture_default_str();
  t->add_option("--sigma", tr.train.sigma, "prior standard deviation")->capture_default_str();
  t->add_option("--lambda-rgb", tr.train.lambda_rgb, "color loss weight")->capture_default_str();
  t->add_option("--lr", tr.train.learning_rate)->capture_default_str();
  t->add_option("--batch", tr.train.batch)->capture_default_str();
  t->add_option("--epochs", tr.train.epochs)->capture_default_str();
  t->add_option("--steps", tr.train.steps, "optimizer step budget, overrides --epochs");
  t->add_option("--ema", tr.train.ema_decay)->capture_default_str();
  t->add_option("--seed", tr.train.seed)->capture_default_str();
  t->add_option("--val-steps", tr.train.val_steps, "sampler steps for validation")->capture_default_str();
  t->add_option("--val-every", tr.train.val_every, "epochs between validations")->capture_default_str();
  t->add_option("--val-samples", tr.train.val_samples)->capture_default_str();

  cli::SampleOptions sa;
  std::string condition;
  auto* s = app.add_subcommand("sample", "sample a point cloud for one condition");
  s->add_option("--checkpoint", sa.checkpoint)->required();
  s->add_option("--condition", condition, "comma-separated values, normalized unless --raw")->required();
  s->add_flag("--raw", sa.raw, "condition is in physical units (m, kg)");
  s->add_option("--steps", sa.steps)->capture_default_str();
  s->add_option("--points", sa.points, "default: training point count");
  s->add_option("--seed", sa.seed)->capture_default_str();
  s->add_option("--out", sa.out, ".ply or .xyz file")->required();

  cli::EvalOptions ev;
  auto* e = app.add_subcommand("eval", "evaluate CD/EMD on a dataset split");
  e->add_option("--checkpoint", ev.checkpoint);
  e->add_option("--data", ev.data)->required();
  e->add_option("--split", ev.split)->capture_default_str();
  e->add_option("--neval", ev.metrics.n_eval, "points per cloud for metrics")->capture_default_str();
  e->add_option("--exact-cap", ev.metrics.exact_cap, "largest size solved by exact EMD")->capture_default_str();
  e->add_option("--auction-eps", ev.metrics.auction_epsilon)->capture_default_str();
  e->add_option("--steps", ev.steps)->capture_default_str();
  e->add_option("--seed", ev.seed)->capture_default_str();
  e->add_option("--baseline", ev.baseline, "constant predictor instead of a model")
      ->check(CLI::IsMember({"mean-shape"}));
  e->add_option("--out", ev.out, "JSON report")->required();

  cli::WorkspaceOptions ws;
  auto* w = app.add_subcommand("workspace", "export YZ tip projections and their hull");
  robot_flags(w, ws.robot);
  w->add_option("--sweep", ws.sweep, "number of sampled commands")->capture_default_str();
  w->add_option("--seed", ws.seed)->capture_default_str();
  w->add_option("--out", ws.out, "CSV file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& h) {
    return app.exit(h);
  } catch (const CLI::CallForAllHelp& h) {
    return app.exit(h);
  } catch (const CLI::CallForVersion& h) {
    return app.exit(h);
  } catch (const CLI::ParseError& err) {
    return fail("usage", err.what());
  }

  try {
    if (*g) {
      cli::run_gen(gen, std::cout);
    } else if (*t) {
      cli::run_train(tr, std::cout);
    } else if (*s) {
      sa.condition = cli::parse_condition(condition);
      cli::run_sample(sa, std::cout);
    } else if (*e) {
      cli::run_eval(ev, std::cout);
    } else if (*w) {
      cli::run_workspace(ws, std::cout);
    }
  } catch (const Error& err) {
    return fail(err.category(), err.what());
  } catch (const std::exception& err) {
    return fail("internal", err.what());
  }
  return 0;
}

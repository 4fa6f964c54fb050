#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "gradcheck.hpp"
#include "tdcrflow/common/error.hpp"
#include "tdcrflow/nets/layers.hpp"
#include "tdcrflow/nets/velocity.hpp"
#include "tdcrflow/numerics/checkpoint.hpp"

using namespace tdcr;
using namespace tdcr::nets;
using num::Graph;
using num::Tensor;
using num::Var;
using tdcr::testing::random_tensor;

namespace {

NetConfig small_config(const std::string& arch, std::size_t channels = 3) {
  NetConfig cfg;
  cfg.arch = arch;
  cfg.channels = channels;
  cfg.condition_width = 4;
  cfg.width = 16;
  cfg.embed_width = 12;
  cfg.blocks = 2;
  cfg.frequencies = 3;
  cfg.context_width = 8;
  cfg.resolutions = {4, 2};
  return cfg;
}

FlowInput random_input(std::size_t batch, std::size_t points, std::size_t channels, std::size_t cond, Rng& rng,
                       double spread = 0.6) {
  FlowInput in;
  in.points = points;
  in.x = random_tensor(batch * points, channels, rng, spread);
  for (std::size_t b = 0; b < batch; ++b) in.t.push_back(rng.uniform());
  in.c = Tensor::matrix(batch, cond);
  for (double& v : in.c.values()) v = rng.uniform();
  return in;
}

FlowInput permuted(const FlowInput& in, const std::vector<std::size_t>& perm) {
  FlowInput out = in;
  for (std::size_t r = 0; r < perm.size(); ++r)
    for (std::size_t c = 0; c < in.x.cols(); ++c) out.x(r, c) = in.x(perm[r], c);
  return out;
}

std::vector<std::size_t> random_perm(std::size_t n, Rng& rng) {
  std::vector<std::size_t> p(n);
  std::iota(p.begin(), p.end(), 0);
  for (std::size_t i = n; i > 1; --i) std::swap(p[i - 1], p[rng.below(i)]);
  return p;
}

// Permutation inside each sample of a batch.
std::vector<std::size_t> per_sample_perm(std::size_t batch, std::size_t points, Rng& rng) {
  std::vector<std::size_t> p;
  for (std::size_t b = 0; b < batch; ++b)
    for (std::size_t r : random_perm(points, rng)) p.push_back(b * points + r);
  return p;
}

// The embedding registers first, so its four tensors lead the set.
Embedding hybrid_embedding(const VelocityNet& net, const NetConfig& cfg) {
  Embedding own;
  own.time = {0, 1};
  own.cond = {2, 3};
  own.pairs = cfg.frequencies;
  own.base = cfg.frequency_base;
  EXPECT_EQ(net.params()[0].name, "embed.time.w");
  EXPECT_EQ(net.params()[3].name, "embed.cond.b");
  return own;
}

}  // namespace

TEST(TimeFeatures, ZeroTime) {
  const auto f = time_features(0.0, 8, 2.0);
  ASSERT_EQ(f.size(), 16u);
  for (std::size_t j = 0; j < 8; ++j) {
    EXPECT_EQ(f[2 * j], 0.0);
    EXPECT_EQ(f[2 * j + 1], 1.0);
  }
}

TEST(TimeGate, Values) {
  EXPECT_EQ(time_gate(0.4, 10.0, 0.4), 0.5);
  EXPECT_NEAR(time_gate(0.0, 10.0, 0.4), 1.0 / (1.0 + std::exp(4.0)), 1e-15);
  EXPECT_NEAR(time_gate(0.0, 10.0, 0.4), 0.01799, 1e-5);
  double prev = 0.0;
  for (int i = 0; i <= 100; ++i) {
    const double g = time_gate(i / 100.0, 10.0, 0.4);
    EXPECT_GT(g, prev);
    EXPECT_LT(g, 1.0);
    prev = g;
  }
  EXPECT_GT(time_gate(-1e6, 10.0, 0.4), -1e-300);
  EXPECT_LE(time_gate(1e6, 10.0, 0.4), 1.0);
}

TEST(Embedding, LinearInCondition) {
  NetConfig cfg = small_config("mlp");
  num::ParameterSet ps;
  Rng rng(1);
  const Embedding emb = Embedding::make(ps, cfg, rng);
  tdcr::testing::randomize(ps, rng);
  const ParamView pv{&ps, num::Weights::live};
  auto embed = [&](const std::vector<double>& c) {
    Graph g(false);
    return emb(g, pv, std::vector<double>{0.3}, Tensor({1, 4}, c)).value();
  };
  const std::vector<double> c1{0.1, 0.7, 0.2, 0.9}, c2{0.5, 0.05, 0.3, 0.4}, zero(4, 0.0);
  std::vector<double> sum(4);
  for (int i = 0; i < 4; ++i) sum[i] = c1[i] + c2[i];
  const Tensor e0 = embed(zero), e1 = embed(c1), e2 = embed(c2), e12 = embed(sum);
  for (std::size_t k = 0; k < e0.size(); ++k) EXPECT_NEAR(e12[k] - e0[k], (e1[k] - e0[k]) + (e2[k] - e0[k]), 1e-12);
}

TEST(Embedding, ZeroConditionGivesTimeTerm) {
  NetConfig cfg = small_config("mlp");
  num::ParameterSet ps;
  Rng rng(2);
  const Embedding emb = Embedding::make(ps, cfg, rng);
  tdcr::testing::randomize(ps, rng);
  // Zero the condition projection bias so c = 0 contributes nothing.
  for (auto& p : ps)
    if (p.name == "embed.cond.b") p.value.fill(0.0);
  const ParamView pv{&ps, num::Weights::live};
  Graph g(false);
  const Tensor e = emb(g, pv, std::vector<double>{0.6}, Tensor::matrix(1, 4)).value();
  // phi_t alone: features times the time projection plus its bias.
  const auto f = time_features(0.6, cfg.frequencies, cfg.frequency_base);
  const auto* w = ps.find("embed.time.w");
  const auto* b = ps.find("embed.time.b");
  ASSERT_NE(w, nullptr);
  ASSERT_NE(b, nullptr);
  for (std::size_t j = 0; j < cfg.embed_width; ++j) {
    double acc = 0.0;
    for (std::size_t i = 0; i < f.size(); ++i) acc += f[i] * w->value(i, j);
    EXPECT_NEAR(e[j], acc + b->value[j], 1e-12);
  }
  Graph g2(false);
  EXPECT_THROW(emb(g2, pv, std::vector<double>{0.6}, Tensor::matrix(1, 3)), ContractViolation);
}

TEST(Film, ZeroHeadsGiveLayerNorm) {
  Graph g(false);
  Var h = g.constant(Tensor({1, 2}, std::vector<double>{1.0, -1.0}));
  Var zero = g.constant(Tensor::matrix(1, 2));
  const Tensor out = film(h, zero, zero, 1e-5).value();
  const Tensor ln = num::layer_norm(h, 1e-5).value();
  EXPECT_EQ(out, ln);
  EXPECT_NEAR(ln[0], 1.0, 1e-4);
  EXPECT_NEAR(ln[1], -1.0, 1e-4);
}

TEST(Film, HandComputedModulation) {
  Graph g(false);
  Var h = g.constant(Tensor({1, 2}, std::vector<double>{1.0, -1.0}));
  Var gamma = g.constant(Tensor({1, 2}, std::vector<double>{1.0, 1.0}));
  Var beta = g.constant(Tensor::matrix(1, 2));
  const Tensor out = film(h, gamma, beta, 1e-5).value();
  EXPECT_NEAR(out[0], 2.0, 1e-4);
  EXPECT_NEAR(out[1], -2.0, 1e-4);
}

TEST(Film, ConstantFeaturesLeaveBeta) {
  Graph g(false);
  Var h = g.constant(Tensor({1, 3}, std::vector<double>{0.7, 0.7, 0.7}));
  Var gamma = g.constant(Tensor({1, 3}, std::vector<double>{0.4, -0.2, 3.0}));
  Var beta = g.constant(Tensor({1, 3}, std::vector<double>{0.1, 0.2, -0.3}));
  const Tensor out = film(h, gamma, beta, 1e-5).value();
  EXPECT_NEAR(out[0], 0.1, 1e-6);
  EXPECT_NEAR(out[1], 0.2, 1e-6);
  EXPECT_NEAR(out[2], -0.3, 1e-6);
}

TEST(MlpNet, ZeroHeadAtInit) {
  for (std::size_t d : {3u, 6u}) {
    auto net = make_network(small_config("mlp", d), 3);
    Rng rng(3);
    const FlowInput in = random_input(2, 7, d, 4, rng);
    const Tensor u = net->velocity(in);
    EXPECT_EQ(u.rows(), 14u);
    EXPECT_EQ(u.cols(), d);
    for (double v : u.values()) EXPECT_EQ(v, 0.0);
  }
}

TEST(MlpNet, PermutationEquivariantBitwise) {
  auto net = make_network(small_config("mlp"), 4);
  Rng rng(4);
  tdcr::testing::randomize(net->params(), rng);
  for (int trial = 0; trial < 10; ++trial) {
    const FlowInput in = random_input(3, 11, 3, 4, rng);
    const auto perm = per_sample_perm(3, 11, rng);
    const Tensor u = net->velocity(in), up = net->velocity(permuted(in, perm));
    for (std::size_t r = 0; r < perm.size(); ++r)
      for (std::size_t c = 0; c < 3; ++c) ASSERT_EQ(up(r, c), u(perm[r], c));
  }
}

TEST(MlpNet, DuplicatePointsDuplicateVelocities) {
  auto net = make_network(small_config("mlp"), 5);
  Rng rng(5);
  tdcr::testing::randomize(net->params(), rng);
  FlowInput in = random_input(1, 6, 3, 4, rng);
  for (std::size_t c = 0; c < 3; ++c) in.x(4, c) = in.x(1, c);
  const Tensor u = net->velocity(in);
  for (std::size_t c = 0; c < 3; ++c) EXPECT_EQ(u(4, c), u(1, c));
}

TEST(MlpNet, GradientsMatchFiniteDifferences) {
  auto net = make_network(small_config("mlp", 6), 6);
  Rng rng(6);
  tdcr::testing::randomize(net->params(), rng);
  const FlowInput in = random_input(2, 4, 6, 4, rng);
  const Tensor w = random_tensor(8, 6, rng);
  const double err = tdcr::testing::check_parameters(net->params(), [&](Graph& g) {
    return num::sum(num::mul(net->forward(g, in, num::Weights::live), g.constant(w)));
  });
  EXPECT_LT(err, 1e-4);
}

TEST(HybridNet, ZeroHeadAtInitAndShape) {
  auto net = make_network(small_config("hybrid"), 7);
  Rng rng(7);
  const FlowInput in = random_input(2, 5, 3, 4, rng);
  const Tensor u = net->velocity(in);
  EXPECT_EQ(u.rows(), 10u);
  for (double v : u.values()) EXPECT_EQ(v, 0.0);
}

TEST(HybridNet, PermutationEquivariantWithinTolerance) {
  auto net = make_network(small_config("hybrid"), 8);
  Rng rng(8);
  tdcr::testing::randomize(net->params(), rng);
  for (int trial = 0; trial < 10; ++trial) {
    const FlowInput in = random_input(2, 40, 3, 4, rng);
    const auto perm = per_sample_perm(2, 40, rng);
    const Tensor u = net->velocity(in), up = net->velocity(permuted(in, perm));
    for (std::size_t r = 0; r < perm.size(); ++r)
      for (std::size_t c = 0; c < 3; ++c) ASSERT_NEAR(up(r, c), u(perm[r], c), 1e-10);
  }
}

TEST(HybridNet, DeterministicForward) {
  auto net = make_network(small_config("hybrid"), 9);
  Rng rng(9);
  tdcr::testing::randomize(net->params(), rng);
  const FlowInput in = random_input(2, 9, 3, 4, rng);
  EXPECT_EQ(net->velocity(in), net->velocity(in));
}

TEST(HybridNet, ContextProperties) {
  NetConfig cfg = small_config("hybrid");
  HybridVelocityNet net(cfg, 10);
  Rng rng(10);
  tdcr::testing::randomize(net.params(), rng);
  // A tight cluster lands in one voxel at every scale.
  FlowInput in = random_input(1, 12, 3, 4, rng, 1e-4);
  for (double& v : in.x.values()) v += 0.1;
  Graph g2(false);
  const Var e = hybrid_embedding(net, cfg)(g2, ParamView{&net.params(), num::Weights::live}, in.t, in.c);
  const auto ctx = net.context(g2, in, e, num::Weights::live);
  const Tensor& local = ctx.local.value();
  const Tensor& global = ctx.global.value();
  for (std::size_t r = 1; r < local.rows(); ++r)
    for (std::size_t c = 0; c < local.cols(); ++c) {
      EXPECT_NEAR(local(r, c), local(0, c), 1e-6);
      EXPECT_EQ(global(r, c), global(0, c));
    }
  ASSERT_EQ(ctx.gate.size(), 12u);
  EXPECT_EQ(ctx.gate[0], time_gate(in.t[0], cfg.gate_k, cfg.gate_tau));
}

TEST(HybridNet, GlobalRowsIdenticalForSpreadClouds) {
  NetConfig cfg = small_config("hybrid");
  HybridVelocityNet net(cfg, 11);
  Rng rng(11);
  tdcr::testing::randomize(net.params(), rng);
  const FlowInput in = random_input(2, 30, 3, 4, rng);
  Graph g(false);
  const Var e = hybrid_embedding(net, cfg)(g, ParamView{&net.params(), num::Weights::live}, in.t, in.c);
  const auto ctx = net.context(g, in, e, num::Weights::live);
  const Tensor& global = ctx.global.value();
  for (std::size_t b = 0; b < 2; ++b)
    for (std::size_t r = 1; r < 30; ++r)
      for (std::size_t c = 0; c < global.cols(); ++c) ASSERT_EQ(global(b * 30 + r, c), global(b * 30, c));
}

TEST(HybridNet, ZeroContextReducesToMlp) {
  NetConfig hcfg = small_config("hybrid");
  NetConfig mcfg = hcfg;
  mcfg.arch = "mlp";
  auto hybrid = make_network(hcfg, 12);
  auto mlp = make_network(mcfg, 13);
  Rng rng(12);
  tdcr::testing::randomize(hybrid->params(), rng);
  for (auto& p : hybrid->params())
    if (p.name.rfind("context.local", 0) == 0 || p.name.rfind("context.global", 0) == 0) {
      p.value.fill(0.0);
      p.ema.fill(0.0);
    }
  for (auto& p : mlp->params()) {
    const auto* src = hybrid->params().find(p.name);
    ASSERT_NE(src, nullptr) << p.name;
    p.value = src->value;
    p.ema = src->ema;
  }
  const FlowInput in = random_input(2, 6, 3, 4, rng);
  EXPECT_EQ(hybrid->velocity(in), mlp->velocity(in));
}

TEST(HybridNet, EarlyTimeUsesGlobalContext) {
  NetConfig cfg = small_config("hybrid");
  cfg.gate_k = 200.0;
  auto net = make_network(cfg, 14);
  Rng rng(14);
  tdcr::testing::randomize(net->params(), rng);
  FlowInput in = random_input(1, 10, 3, 4, rng);
  in.t = {0.0};
  const Tensor a = net->velocity(in);
  // Scrambling the local branch must not matter when the gate is ~0.
  for (auto& p : net->params())
    if (p.name.rfind("context.local", 0) == 0)
      for (double& v : p.ema.values()) v += 1.0;
  const Tensor b = net->velocity(in);
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_NEAR(a[i], b[i], 1e-12);
}

TEST(HybridNet, GradientsMatchFiniteDifferences) {
  auto net = make_network(small_config("hybrid"), 15);
  Rng rng(15);
  tdcr::testing::randomize(net->params(), rng);
  const FlowInput in = random_input(2, 8, 3, 4, rng);
  const Tensor w = random_tensor(16, 3, rng);
  const double err = tdcr::testing::check_parameters(net->params(), [&](Graph& g) {
    return num::sum(num::mul(net->forward(g, in, num::Weights::live), g.constant(w)));
  });
  EXPECT_LT(err, 1e-4);
}

TEST(VoxelAssignment, TrilinearWeightsAreNormalized) {
  Rng rng(16);
  const FlowInput in = random_input(2, 50, 3, 4, rng, 1.0);
  for (std::size_t res : {2u, 4u, 16u}) {
    const VoxelAssignment va = assign_voxels(in, res, 1.5);
    ASSERT_EQ(va.voxel_of_row.size(), 100u);
    ASSERT_EQ(va.weights.size(), 800u);
    for (std::size_t r = 0; r < 100; ++r) {
      double s = 0.0;
      for (std::size_t k = 0; k < 8; ++k) {
        if (va.neighbors[r * 8 + k] < 0) continue;
        EXPECT_GE(va.weights[r * 8 + k], 0.0);
        s += va.weights[r * 8 + k];
        const auto v = static_cast<std::size_t>(va.neighbors[r * 8 + k]);
        // Neighbours never cross into another sample's grid.
        EXPECT_EQ(va.sample_of_voxel[v], va.sample_of_voxel[static_cast<std::size_t>(va.voxel_of_row[r])]);
      }
      EXPECT_NEAR(s, 1.0, 1e-12);
    }
  }
}

TEST(NetworkManifest, RoundTrip) {
  auto net = make_network(small_config("hybrid"), 17);
  Rng rng(17);
  tdcr::testing::randomize(net->params(), rng);
  const auto manifest = network_manifest(*net);
  auto back = network_from_manifest(manifest, net->params());
  const FlowInput in = random_input(1, 5, 3, 4, rng);
  EXPECT_EQ(back->velocity(in), net->velocity(in));
  EXPECT_THROW(network_from_manifest(nlohmann::json::object(), net->params()), FormatError);
  NetConfig bad = small_config("mlp");
  bad.arch = "transformer";
  EXPECT_THROW(make_network(bad, 0), ContractViolation);
}

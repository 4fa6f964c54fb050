#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <numeric>

#include "gradcheck.hpp"
#include "primitive_cases.hpp"
#include "tdcrflow/common/error.hpp"
#include "tdcrflow/numerics/checkpoint.hpp"
#include "tdcrflow/numerics/graph.hpp"
#include "tdcrflow/numerics/optimizer.hpp"

using namespace tdcr;
using namespace tdcr::num;
using tdcr::testing::check_leaves;
using tdcr::testing::random_tensor;

namespace {

Tensor row_tensor(std::vector<double> v) {
  const std::size_t n = v.size();
  return Tensor({1, n}, std::move(v));
}

constexpr double kGradTol = 1e-4;

}  // namespace

TEST(Tensor, ShapeMustMatchData) {
  EXPECT_THROW(Tensor({2, 3}, std::vector<double>(5)), ContractViolation);
  Tensor t({2, 3}, 1.5);
  EXPECT_EQ(t.rows(), 2u);
  EXPECT_EQ(t.cols(), 3u);
  EXPECT_TRUE(t.all_finite());
  t(1, 2) = std::nan("");
  EXPECT_FALSE(t.all_finite());
  t(1, 2) = -INFINITY;
  EXPECT_FALSE(t.all_finite());
}

TEST(Graph, SquareSumGradient) {
  Graph g;
  Var w = g.variable(row_tensor({1.0, 2.0}));
  const double loss = g.backward(sum(mul(w, w)));
  EXPECT_DOUBLE_EQ(loss, 5.0);
  EXPECT_DOUBLE_EQ(g.grad(w)[0], 2.0);
  EXPECT_DOUBLE_EQ(g.grad(w)[1], 4.0);
}

TEST(Graph, ConstantLossGivesZeroGradients) {
  ParameterSet ps;
  ps.add("w", row_tensor({3.0, -1.0}));
  ps[0].grad[0] = 7.0;  // stale value must be cleared by zero_grad
  ps.zero_grad();
  Graph g;
  Var w = g.parameter(ps[0]);
  Var c = g.constant(row_tensor({2.0, 2.0}));
  g.backward(sum(add(scale(w, 0.0), c)));
  for (double v : ps[0].grad.values()) EXPECT_EQ(v, 0.0);
}

TEST(Graph, NonScalarLossIsRejected) {
  Graph g;
  Var w = g.variable(row_tensor({1.0, 2.0}));
  EXPECT_THROW(g.backward(mul(w, w)), ContractViolation);
}

TEST(Graph, NonFiniteValueNamesTheOperation) {
  Graph g;
  Var a = g.variable(row_tensor({1e200}));
  try {
    (void)mul(a, a);
    FAIL() << "expected NumericError";
  } catch (const NumericError& e) {
    EXPECT_NE(std::string(e.what()).find("mul"), std::string::npos) << e.what();
  }
}

TEST(Graph, BackwardOnlyOnce) {
  Graph g;
  Var w = g.variable(row_tensor({1.0}));
  Var l = sum(w);
  g.backward(l);
  EXPECT_THROW(g.backward(l), ContractViolation);
}

TEST(Graph, InferenceGraphHasNoBackward) {
  Graph g(false);
  Var w = g.constant(row_tensor({1.0}));
  EXPECT_THROW(g.backward(sum(w)), ContractViolation);
}

// Every primitive against central differences.
TEST(PrimitiveGradients, MatchFiniteDifferences) {
  Rng rng(42);
  for (const auto& c : tdcr::testing::primitive_cases()) EXPECT_LT(c.run(rng), kGradTol) << c.name;
}

TEST(ScatterMean, OrderArgumentOnlyChangesSummationOrder) {
  Graph g(false);
  Tensor x({4, 1}, std::vector<double>{1.0, 2.0, 3.0, 4.0});
  const std::vector<std::int32_t> bin{0, 1, 0, 1};
  const std::vector<std::uint32_t> order{2, 0, 3, 1};
  Var a = scatter_mean(g.constant(x), bin, 3);
  Var b = scatter_mean(g.constant(x), bin, 3, order);
  EXPECT_DOUBLE_EQ(a.value()(0, 0), 2.0);
  EXPECT_DOUBLE_EQ(a.value()(1, 0), 3.0);
  EXPECT_EQ(a.value()(2, 0), 0.0);
  EXPECT_EQ(a.value(), b.value());
}

TEST(Adam, FirstStepMovesEachCoordinateByLearningRate) {
  ParameterSet ps;
  ps.add("w", row_tensor({1.0, -2.0, 0.5}));
  ps[0].grad = row_tensor({0.3, -4.0, 1e-3});
  Adam opt({0.01});
  opt.init(ps);
  opt.step(ps);
  EXPECT_NEAR(ps[0].value[0], 1.0 - 0.01, 1e-6);
  EXPECT_NEAR(ps[0].value[1], -2.0 + 0.01, 1e-6);
  EXPECT_NEAR(ps[0].value[2], 0.5 - 0.01, 1e-6);
  EXPECT_DOUBLE_EQ(ps[0].grad[0], 0.3);  // gradients untouched
  EXPECT_EQ(opt.step_count(), 1u);
}

TEST(Adam, ZeroGradientLeavesParameters) {
  ParameterSet ps;
  ps.add("w", row_tensor({1.0, 2.0}));
  Adam opt;
  opt.init(ps);
  opt.step(ps);
  EXPECT_EQ(ps[0].value, row_tensor({1.0, 2.0}));
}

TEST(Adam, UninitializedStateIsRejected) {
  ParameterSet ps;
  ps.add("w", row_tensor({1.0}));
  Adam opt;
  EXPECT_THROW(opt.step(ps), ContractViolation);
}

TEST(Adam, Deterministic) {
  auto run = [] {
    ParameterSet ps;
    ps.add("w", row_tensor({1.0, 2.0}));
    Adam opt;
    opt.init(ps);
    for (int i = 0; i < 5; ++i) {
      ps[0].grad = row_tensor({0.1 * i, -0.3});
      opt.step(ps);
    }
    return ps[0].value;
  };
  EXPECT_EQ(run(), run());
}

TEST(Ema, DecayEndpointsAndArithmetic) {
  ParameterSet ps;
  ps.add("w", row_tensor({10.0}));
  ps[0].ema = row_tensor({0.0});
  ema_update(ps, 0.9);
  EXPECT_NEAR(ps[0].ema[0], 1.0, 1e-12);
  ema_update(ps, 1.0);
  EXPECT_NEAR(ps[0].ema[0], 1.0, 1e-12);
  ema_update(ps, 0.0);
  EXPECT_EQ(ps[0].ema[0], 10.0);
  EXPECT_THROW(ema_update(ps, 1.5), ContractViolation);
  EXPECT_THROW(ema_update(ps, -0.1), ContractViolation);
}

TEST(Ema, StaysBetweenOldValueAndCurrentValue) {
  Rng rng(3);
  ParameterSet ps;
  ps.add("w", random_tensor(1, 64, rng));
  for (int step = 0; step < 50; ++step) {
    const Tensor old = ps[0].ema;
    ps[0].value = random_tensor(1, 64, rng, 1e3);
    ema_update(ps, rng.uniform());
    for (std::size_t i = 0; i < 64; ++i) {
      EXPECT_LE(std::min(old[i], ps[0].value[i]), ps[0].ema[i]);
      EXPECT_GE(std::max(old[i], ps[0].value[i]), ps[0].ema[i]);
    }
  }
}

TEST(Checkpoint, RoundTripIsBitExact) {
  Rng rng(5);
  ParameterSet ps;
  ps.add("a", random_tensor(3, 4, rng));
  ps.add("b", random_tensor(1, 7, rng));
  ps[0].ema = random_tensor(3, 4, rng);
  ps[1].ema = random_tensor(1, 7, rng);
  const nlohmann::json manifest{{"arch", "test"}, {"seed", 5}};
  const std::string bytes = encode_checkpoint(manifest, ps);
  const CheckpointData back = decode_checkpoint(bytes);
  ASSERT_EQ(back.params.size(), 2u);
  for (std::size_t i = 0; i < 2; ++i) {
    EXPECT_EQ(back.params[i].name, ps[i].name);
    EXPECT_EQ(back.params[i].value, ps[i].value);
    EXPECT_EQ(back.params[i].ema, ps[i].ema);
  }
  EXPECT_EQ(back.manifest.at("arch"), "test");
  EXPECT_EQ(encode_checkpoint(back.manifest, back.params), bytes);
}

TEST(Checkpoint, CorruptInputIsRejected) {
  ParameterSet ps;
  ps.add("a", row_tensor({1.0, 2.0}));
  std::string bytes = encode_checkpoint(nlohmann::json::object(), ps);
  EXPECT_THROW(decode_checkpoint("NOTACKPT" + bytes.substr(8)), FormatError);
  EXPECT_THROW(decode_checkpoint(bytes.substr(0, bytes.size() - 3)), FormatError);
  EXPECT_THROW(decode_checkpoint(bytes + "x"), FormatError);
}

TEST(Checkpoint, LoadParametersChecksNamesAndShapes) {
  ParameterSet a, b;
  a.add("w", row_tensor({1.0, 2.0}));
  b.add("v", row_tensor({0.0, 0.0}));
  EXPECT_THROW(load_parameters(b, a), Error);
}

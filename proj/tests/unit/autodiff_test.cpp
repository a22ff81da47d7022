#include <gtest/gtest.h>

#include <cstring>

#include "gradcheck_cases.hpp"
#include "hetgnn/autodiff/adam.hpp"

using namespace hetgnn;
using testutil::random_matrix;

TEST(Primitives, EveryPrimitivePassesGradCheck) {
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    const auto checks = testutil::check_all_primitives(seed);
    EXPECT_EQ(checks.size(), 22u);
    for (const auto& c : checks) {
      EXPECT_LT(c.report.max_relative_error, 1e-4) << c.name << " worst " << c.report.worst_parameter << "["
                                                   << c.report.worst_entry << "]";
      EXPECT_GT(c.report.entries_checked, 0u) << c.name;
    }
  }
}

TEST(Primitives, ReluExample) {
  ad::ParameterSet ps;
  ad::Parameter& p = ps.add("x", Matrix{{-1.0, 2.0}});
  ad::Tape t;
  ad::Var y = ad::relu(t.parameter(p));
  EXPECT_EQ(y.value()(0, 0), 0.0);
  EXPECT_EQ(y.value()(0, 1), 2.0);
  t.backward(ad::sum(y));
  EXPECT_EQ(p.grad(0, 0), 0.0);
  EXPECT_EQ(p.grad(0, 1), 1.0);
}

TEST(Primitives, SoftmaxExamplesAndContract) {
  ad::Tape t;
  const Matrix s = ad::row_softmax(t.constant(Matrix(1, 3))).value();
  for (std::size_t j = 0; j < 3; ++j) EXPECT_DOUBLE_EQ(s(0, j), 1.0 / 3.0);

  Rng rng(5);
  const Matrix r = ad::row_softmax(t.constant(random_matrix(20, 6, rng, 5.0))).value();
  for (std::size_t i = 0; i < 20; ++i) {
    double sum = 0.0;
    for (double v : r.row(i)) {
      EXPECT_GT(v, 0.0);
      EXPECT_LT(v, 1.0);
      sum += v;
    }
    EXPECT_NEAR(sum, 1.0, 1e-12);
  }
  EXPECT_THROW(ad::row_softmax(t.constant(Matrix(2, 0))), ShapeError);
}

TEST(Primitives, SpmmIdentityIsExact) {
  Rng rng(1);
  const Matrix x = random_matrix(7, 3, rng);
  ad::Tape t;
  const Matrix y = ad::spmm(std::make_shared<const CsrMatrix>(CsrMatrix::identity(7)), t.constant(x)).value();
  EXPECT_EQ(max_abs_diff(y, x), 0.0);
}

TEST(Primitives, SpmmMatchesDenseOracle) {
  Rng rng(42);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t n = 1 + rng.below(200), d = 1 + rng.below(16);
    const Graph g = testutil::random_graph(n, 1, 1, rng.uniform(0.0, 0.2), 100 + trial);
    const Matrix x = random_matrix(n, d, rng);
    const CsrMatrix a = sym_normalize(add_self_loops(g.adjacency()));
    EXPECT_LE(max_abs_diff(spmm(a, x), matmul(a.to_dense(), x)), 1e-12);
  }
}

TEST(Primitives, ErrorPaths) {
  ad::Tape t;
  EXPECT_THROW(ad::matmul(t.constant(Matrix(2, 3)), t.constant(Matrix(2, 3))), ShapeError);
  EXPECT_THROW(ad::add(t.constant(Matrix(2, 3)), t.constant(Matrix(3, 2))), ShapeError);
  EXPECT_THROW(ad::log(t.constant(Matrix{{1.0, 0.0}})), RangeError);
  EXPECT_THROW(ad::log(t.constant(Matrix{{-1.0}})), RangeError);
  EXPECT_THROW(ad::masked_cross_entropy(t.constant(Matrix(2, 2)), std::vector<int>{0, 1}, {}), RangeError);
  ad::Tape other;
  EXPECT_THROW(ad::add(t.constant(Matrix(1, 1)), other.constant(Matrix(1, 1))), Error);
}

TEST(Primitives, NonFiniteValuesTrip) {
  ad::Tape t;
  ad::Var big = t.constant(Matrix{{1e308}});
  EXPECT_THROW(ad::scale(big, 10.0), NumericalError);
}

TEST(Backward, LinearMapClosedForm) {
  ad::ParameterSet ps;
  ad::Parameter& w = ps.add("W", Matrix{{1, 2}, {3, 4}, {5, 6}});
  const Matrix x{{0.5, -1.0, 2.0}};
  ad::Tape t;
  t.backward(ad::sum(ad::matmul(t.constant(x), t.parameter(w))));
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 2; ++j) EXPECT_EQ(w.grad(i, j), x(0, i));
}

TEST(Backward, DisconnectedParameterHasZeroGradient) {
  ad::ParameterSet ps;
  ad::Parameter& used = ps.add("used", Matrix{{2.0}});
  ad::Parameter& unused = ps.add("unused", Matrix{{3.0}});
  ad::Tape t;
  t.parameter(unused);
  t.backward(ad::scale(t.parameter(used), 4.0));
  EXPECT_EQ(used.grad(0, 0), 4.0);
  EXPECT_EQ(unused.grad(0, 0), 0.0);
}

TEST(Backward, NonScalarLossRejected) {
  ad::Tape t;
  EXPECT_THROW(t.backward(t.leaf(Matrix(2, 1))), ShapeError);
}

TEST(Dropout, EvalIsIdentityTrainScalesKept) {
  Rng rng(3);
  const Matrix x = random_matrix(10, 10, rng);
  ad::Tape eval(false);
  EXPECT_EQ(max_abs_diff(ad::dropout(eval.constant(x), 0.3).value(), x), 0.0);
  EXPECT_FALSE(eval.stochastic());

  ad::Tape train(true, 1);
  const Matrix y = ad::dropout(train.constant(x), 0.3).value();
  EXPECT_TRUE(train.stochastic());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double v = y.data()[i];
    EXPECT_TRUE(v == 0.0 || std::abs(v - x.data()[i] / 0.7) < 1e-15);
  }
  EXPECT_THROW(ad::dropout(train.constant(x), 1.0), RangeError);
}

TEST(Dropout, ExpectationPreserved) {
  ad::Tape t(true, 9);
  const std::size_t n = 20000;
  const Matrix y = ad::dropout(t.constant(Matrix(n, 1, 1.0)), 0.4).value();
  double mean = 0.0;
  for (double v : y.data()) mean += v;
  mean /= static_cast<double>(n);
  EXPECT_NEAR(mean, 1.0, 0.01 * 1.0 + 0.01);
}

TEST(Dropout, GradientIsMask) {
  ad::ParameterSet ps;
  ad::Parameter& p = ps.add("x", Matrix(4, 5, 1.0));
  ad::Tape t(true, 4);
  ad::Var y = ad::dropout(t.parameter(p), 0.5);
  t.backward(ad::sum(y));
  for (std::size_t i = 0; i < 20; ++i) EXPECT_EQ(p.grad.data()[i], y.value().data()[i]);
}

TEST(Adam, ZeroGradientNoDecayLeavesParams) {
  ad::ParameterSet ps;
  ps.add("w", Matrix{{1.5, -2.0}});
  ad::Adam adam(ad::AdamConfig{0.01, 0.9, 0.999, 1e-8, 0.0});
  adam.step(ps);
  EXPECT_EQ(ps[0].value(0, 0), 1.5);
  EXPECT_EQ(ps[0].value(0, 1), -2.0);
}

TEST(Adam, FirstStepHandComputed) {
  ad::ParameterSet ps;
  ad::Parameter& p = ps.add("p", Matrix{{1.0}});
  p.grad(0, 0) = 1.0;
  ad::Adam adam(ad::AdamConfig{0.01});
  adam.step(ps);
  EXPECT_NEAR(p.value(0, 0), 1.0 - 0.01 / (1.0 + 1e-8), 1e-15);
  EXPECT_NEAR(p.value(0, 0), 0.99, 1e-9);
  adam.step(ps);
  EXPECT_EQ(adam.step_count(), 2u);
  EXPECT_GT(adam.second_moments()[0](0, 0), 0.0);
}

TEST(Adam, ZeroLearningRateIsBitIdentical) {
  Rng rng(2);
  ad::ParameterSet ps;
  ad::Parameter& p = ps.add("w", random_matrix(5, 5, rng));
  const Matrix before = p.value;
  ad::Adam adam(ad::AdamConfig{0.0, 0.9, 0.999, 1e-8, 5e-4});
  for (int s = 0; s < 3; ++s) {
    p.grad = random_matrix(5, 5, rng);
    adam.step(ps);
  }
  EXPECT_EQ(std::memcmp(before.data().data(), p.value.data().data(), 25 * sizeof(double)), 0);
}

TEST(Adam, WeightDecayAddsToGradient) {
  ad::ParameterSet ps;
  ad::Parameter& p = ps.add("w", Matrix{{2.0}});
  ad::Adam adam(ad::AdamConfig{0.1, 0.9, 0.999, 1e-8, 0.5});
  adam.step(ps);
  EXPECT_LT(p.value(0, 0), 2.0);
}

TEST(Adam, NanGradientNamesParameter) {
  ad::ParameterSet ps;
  ad::Parameter& p = ps.add("layer1.ch0.W", Matrix{{1.0}});
  p.grad(0, 0) = std::nan("");
  ad::Adam adam;
  try {
    adam.step(ps);
    FAIL();
  } catch (const NumericalError& e) {
    EXPECT_NE(std::string(e.what()).find("layer1.ch0.W"), std::string::npos);
  }
  EXPECT_THROW(ad::Adam(ad::AdamConfig{-1.0}), ConfigError);
}

TEST(GradCheck, LinearRegressionIsTight) {
  Rng rng(7);
  const Matrix x = random_matrix(12, 3, rng), y = random_matrix(12, 1, rng);
  ad::ParameterSet ps;
  ps.add("w", random_matrix(3, 1, rng));
  auto loss = [&](ad::Tape& t) {
    ad::Var r = ad::sub(ad::matmul(t.constant(x), t.parameter(ps.get("w"))), t.constant(y));
    return ad::mean(ad::hadamard(r, r));
  };
  EXPECT_LT(ad::grad_check(loss, ps).max_relative_error, 1e-7);
}

TEST(GradCheck, RefusesStochasticForward) {
  const Graph g = testutil::toy8();
  cmgnn::CmgnnConfig cfg;
  cfg.hidden = 4;
  cfg.dropout = 0.5;
  cmgnn::CmgnnModel model(g, testutil::toy8_train(), cfg, 1);
  auto loss = [&](ad::Tape& t) { return ad::masked_cross_entropy(model.forward(t).logits, g.labels(), testutil::toy8_train()); };
  ad::GradCheckOptions opt;
  opt.training = true;
  EXPECT_THROW(ad::grad_check(loss, model.parameters(), opt), Error);
}

TEST(GradCheck, SubsamplesLargeParameterSets) {
  Rng rng(1);
  ad::ParameterSet ps;
  ps.add("w", random_matrix(120, 100, rng));
  auto loss = [&](ad::Tape& t) { return ad::sum(ad::sigmoid(t.parameter(ps.get("w")))); };
  const auto rep = ad::grad_check(loss, ps);
  EXPECT_EQ(rep.entries_checked, 10000u);
  EXPECT_LT(rep.max_relative_error, 1e-4);
}

TEST(Init, GlorotBoundsAndDeterminism) {
  Rng a(3, 1), b(3, 1);
  const Matrix w = ad::glorot_uniform(10, 20, a);
  EXPECT_EQ(max_abs_diff(w, ad::glorot_uniform(10, 20, b)), 0.0);
  const double lim = std::sqrt(6.0 / 30.0);
  for (double v : w.data()) EXPECT_LE(std::abs(v), lim);
}

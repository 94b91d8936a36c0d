#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "omnic/errors.hpp"
#include "omnic/grad_check.hpp"
#include "omnic/ops.hpp"
#include "omnic/tape.hpp"
#include "support/grad_suite.hpp"
#include "support/oracles.hpp"

namespace omnic {
namespace {

using testing::Matrix;

TEST(Tensor, ShapeAndDataAgree) {
  TensorF t = TensorF::zeros({2, 3, 4});
  EXPECT_EQ(t.numel(), 24u);
  EXPECT_EQ(t.data().size(), 24u);
  EXPECT_EQ(t.rank(), 3u);
  EXPECT_THROW(TensorF({2, 2}, std::vector<float>(3)), DimensionError);
}

TEST(Tensor, GradIsAllocatedWithMatchingShape) {
  TensorD t = TensorD::full({3, 2}, 1.5, true);
  EXPECT_FALSE(t.has_grad());
  EXPECT_EQ(t.grad().size(), t.numel());
  EXPECT_TRUE(t.has_grad());
  t.clear_grad();
  EXPECT_FALSE(t.has_grad());
}

TEST(Tensor, CloneIsIndependent) {
  TensorF a = TensorF::full({2}, 1.0f);
  TensorF b = a.clone();
  b.data()[0] = 5.0f;
  EXPECT_EQ(a.data()[0], 1.0f);
  TensorF c = a;  // handle copy shares storage
  c.data()[1] = 7.0f;
  EXPECT_EQ(a.data()[1], 7.0f);
}

TEST(Tape, ReplaysInReverseOrder) {
  Tape<double> tape;
  std::vector<int> order;
  TensorD loss = TensorD::scalar(1.0, true);
  for (int i = 0; i < 4; ++i) tape.record("op" + std::to_string(i), [&order, i] { order.push_back(i); });
  tape.backward(loss);
  EXPECT_EQ(order, (std::vector<int>{3, 2, 1, 0}));
}

TEST(Tape, IsConsumedByOneBackward) {
  Tape<double> tape;
  TensorD x = TensorD::full({2}, 2.0, true);
  TensorD loss = ops::sum(tape, ops::mul(tape, x, x));
  tape.backward(loss);
  EXPECT_THROW(tape.backward(loss), StateError);
}

TEST(Tape, RejectsNonScalarLoss) {
  Tape<double> tape;
  TensorD x = TensorD::full({2}, 2.0, true);
  TensorD y = ops::mul(tape, x, x);
  EXPECT_THROW(tape.backward(y), ContractError);
}

TEST(Tape, NoGradTapeRecordsNothing) {
  auto tape = Tape<double>::no_grad();
  TensorD x = TensorD::full({2}, 2.0, true);
  ops::sum(tape, ops::mul(tape, x, x));
  EXPECT_EQ(tape.size(), 0u);
}

TEST(Matmul, MatchesTripleLoop) {
  std::mt19937_64 rng(1);
  const Matrix a = testing::random_matrix(5, 7, rng);
  const Matrix b = testing::random_matrix(7, 3, rng);
  const Matrix want = testing::matmul_oracle(a, b);
  auto tape = Tape<double>::no_grad();
  const TensorD c = ops::matmul(tape, testing::to_tensor<double>(a), testing::to_tensor<double>(b));
  ASSERT_EQ(c.shape(), (Shape{5, 3}));
  for (std::size_t i = 0; i < 5; ++i) {
    for (std::size_t j = 0; j < 3; ++j) EXPECT_NEAR(c.at(i * 3 + j), want[i][j], 1e-12);
  }
}

TEST(Matmul, TransposedRightOperandMatchesTripleLoop) {
  std::mt19937_64 rng(2);
  const Matrix a = testing::random_matrix(4, 6, rng);
  const Matrix bt = testing::random_matrix(5, 6, rng);
  Matrix b(6, std::vector<double>(5));
  for (std::size_t i = 0; i < 5; ++i) {
    for (std::size_t j = 0; j < 6; ++j) b[j][i] = bt[i][j];
  }
  const Matrix want = testing::matmul_oracle(a, b);
  auto tape = Tape<double>::no_grad();
  const TensorD c = ops::matmul(tape, testing::to_tensor<double>(a), testing::to_tensor<double>(bt), true);
  for (std::size_t i = 0; i < 4; ++i) {
    for (std::size_t j = 0; j < 5; ++j) EXPECT_NEAR(c.at(i * 5 + j), want[i][j], 1e-12);
  }
}

TEST(Matmul, InnerDimensionMismatchThrows) {
  auto tape = Tape<float>::no_grad();
  EXPECT_THROW(ops::matmul(tape, TensorF::zeros({2, 3}), TensorF::zeros({4, 2})), DimensionError);
}

TEST(Matmul, GradientsAreTransposedProducts) {
  std::mt19937_64 rng(3);
  const Matrix a = testing::random_matrix(2, 3, rng);
  const Matrix b = testing::random_matrix(3, 2, rng);
  TensorD ta = testing::to_tensor<double>(a, true);
  TensorD tb = testing::to_tensor<double>(b, true);
  Tape<double> tape;
  TensorD loss = ops::sum(tape, ops::matmul(tape, ta, tb));
  tape.backward(loss);
  // dL/dC is all ones: dA[i][t] = Σ_j b[t][j], dB[t][j] = Σ_i a[i][t].
  for (std::size_t i = 0; i < 2; ++i) {
    for (std::size_t t = 0; t < 3; ++t) EXPECT_NEAR(ta.grad()[i * 3 + t], b[t][0] + b[t][1], 1e-12);
  }
  for (std::size_t t = 0; t < 3; ++t) {
    for (std::size_t j = 0; j < 2; ++j) EXPECT_NEAR(tb.grad()[t * 2 + j], a[0][t] + a[1][t], 1e-12);
  }
}

TEST(Softmax, MatchesFormulaAndSumsToOne) {
  std::mt19937_64 rng(4);
  const Matrix x = testing::random_matrix(3, 6, rng, 3.0);
  auto tape = Tape<double>::no_grad();
  const TensorD y = ops::softmax_lastdim(tape, testing::to_tensor<double>(x));
  for (std::size_t i = 0; i < 3; ++i) {
    double denom = 0.0;
    for (double v : x[i]) denom += std::exp(v);
    double row = 0.0;
    for (std::size_t j = 0; j < 6; ++j) {
      EXPECT_NEAR(y.at(i * 6 + j), std::exp(x[i][j]) / denom, 1e-14);
      row += y.at(i * 6 + j);
    }
    EXPECT_NEAR(row, 1.0, 1e-12);
  }
}

TEST(Softmax, LargeLogitsStayFinite) {
  auto tape = Tape<float>::no_grad();
  const TensorF y = ops::softmax_lastdim(tape, TensorF({1, 3}, {1000.0f, 999.0f, -1000.0f}));
  for (float v : y.data()) EXPECT_TRUE(std::isfinite(v));
  EXPECT_NEAR(y.at(0) + y.at(1), 1.0f, 1e-6f);
}

TEST(LayerNorm, MatchesReference) {
  std::mt19937_64 rng(5);
  const Matrix x = testing::random_matrix(2, 5, rng, 2.0);
  auto tape = Tape<double>::no_grad();
  const TensorD gain({5}, {1.0, 2.0, 0.5, 1.5, -1.0});
  const TensorD bias({5}, {0.1, 0.0, -0.2, 0.3, 0.0});
  const TensorD y = ops::layer_norm(tape, testing::to_tensor<double>(x), gain, bias, 1e-5);
  for (std::size_t i = 0; i < 2; ++i) {
    double mu = 0.0;
    for (double v : x[i]) mu += v / 5.0;
    double var = 0.0;
    for (double v : x[i]) var += (v - mu) * (v - mu) / 5.0;
    for (std::size_t j = 0; j < 5; ++j) {
      const double want = (x[i][j] - mu) / std::sqrt(var + 1e-5) * gain.at(j) + bias.at(j);
      EXPECT_NEAR(y.at(i * 5 + j), want, 1e-12);
    }
  }
}

TEST(L2Normalize, ZeroRowIsNumericError) {
  auto tape = Tape<double>::no_grad();
  EXPECT_THROW(ops::l2_normalize(tape, TensorD({2, 2}, {1.0, 0.0, 0.0, 0.0})), NumericError);
}

TEST(CrossEntropy, MatchesLogSumExp) {
  auto tape = Tape<double>::no_grad();
  const TensorD logits({2, 3}, {1.0, 2.0, 3.0, 0.5, -0.5, 0.0});
  const std::vector<std::int32_t> targets{2, 1};
  const double l0 = std::log(std::exp(1.0) + std::exp(2.0) + std::exp(3.0)) - 3.0;
  const double l1 = std::log(std::exp(0.5) + std::exp(-0.5) + std::exp(0.0)) + 0.5;
  EXPECT_NEAR(ops::cross_entropy(tape, logits, targets).item(), 0.5 * (l0 + l1), 1e-14);
}

TEST(Gelu, MatchesTanhForm) {
  auto tape = Tape<double>::no_grad();
  const TensorD x({5}, {-3.0, -0.5, 0.0, 0.7, 2.5});
  const TensorD y = ops::gelu(tape, x);
  for (std::size_t i = 0; i < 5; ++i) {
    const double v = x.at(i);
    const double want = 0.5 * v * (1.0 + std::tanh(std::sqrt(2.0 / M_PI) * (v + 0.044715 * v * v * v)));
    EXPECT_NEAR(y.at(i), want, 1e-14);
  }
}

TEST(Concat, RejectsMismatchedExtents) {
  auto tape = Tape<float>::no_grad();
  EXPECT_THROW(ops::concat(tape, {TensorF::zeros({2, 3}), TensorF::zeros({3, 2})}, 0), DimensionError);
}

TEST(Matmul, IdentityAndDotProduct) {
  auto tape = Tape<double>::no_grad();
  const TensorD c = ops::matmul(tape, TensorD({2, 2}, {1, 0, 0, 1}), TensorD({2, 2}, {2, 3, 4, 5}));
  EXPECT_EQ(std::vector<double>(c.data().begin(), c.data().end()), (std::vector<double>{2, 3, 4, 5}));
  EXPECT_EQ(ops::matmul(tape, TensorD({1, 2}, {1, 2}), TensorD({2, 1}, {3, 4})).item(), 11.0);
}

TEST(Softmax, UniformAndShiftedLogits) {
  auto tape = Tape<double>::no_grad();
  const TensorD u = ops::softmax_lastdim(tape, TensorD::zeros({3}));
  for (double v : u.data()) EXPECT_NEAR(v, 1.0 / 3.0, 1e-15);
  const TensorD big = ops::softmax_lastdim(tape, TensorD({2}, {1000.0, 1000.0}));
  EXPECT_EQ(big.at(0), 0.5);
  EXPECT_EQ(big.at(1), 0.5);
}

TEST(Softmax, NonFiniteInputThrows) {
  auto tape = Tape<double>::no_grad();
  EXPECT_THROW(ops::softmax_lastdim(tape, TensorD({2}, {1.0, std::nan("")})), NumericError);
}

TEST(LayerNorm, ConstantSliceAndZeroGain) {
  auto tape = Tape<double>::no_grad();
  const TensorD ones = TensorD::full({4}, 1.0);
  const TensorD zeros = TensorD::zeros({4});
  const TensorD y = ops::layer_norm(tape, TensorD::full({1, 4}, 5.0), ones, zeros, 1e-5);
  for (double v : y.data()) EXPECT_EQ(v, 0.0);
  const TensorD bias({4}, {1, 2, 3, 4});
  const TensorD z = ops::layer_norm(tape, TensorD({2, 4}, {1, 5, 2, 8, 0, 3, 3, 1}), zeros, bias, 1e-5);
  for (std::size_t i = 0; i < 8; ++i) EXPECT_EQ(z.at(i), bias.at(i % 4));
  EXPECT_THROW(ops::layer_norm(tape, TensorD::zeros({2, 3}), ones, zeros, 1e-5), DimensionError);
}

TEST(Backward, QuadraticAndUnusedLeaf) {
  Tape<double> tape;
  TensorD x({2}, {1.0, 2.0}, true);
  TensorD w = TensorD::full({3}, 1.0, true);
  TensorD loss = ops::sum(tape, ops::mul(tape, x, x));
  tape.backward(loss);
  EXPECT_EQ(x.grad()[0], 2.0);
  EXPECT_EQ(x.grad()[1], 4.0);
  for (double g : w.grad()) EXPECT_EQ(g, 0.0);
}

TEST(GradCheck, LinearFunctionIsExactToRoundoff) {
  TensorD theta({3}, {0.5, -1.0, 2.0}, true);
  const TensorD coeff({3}, {3.0, -2.0, 0.25});
  const auto report = finite_diff_grad_check(
      [&](Tape<double>& tape) { return ops::sum(tape, ops::mul(tape, theta, coeff)); }, {{"theta", theta}});
  EXPECT_TRUE(report.passed);
  EXPECT_LT(report.max_rel_error, 1e-9);
}

TEST(GradCheck, ConstantFunctionHasZeroError) {
  TensorD theta({2}, {0.5, -1.0}, true);
  const auto report = finite_diff_grad_check(
      [](Tape<double>&) { return TensorD::scalar(4.0); }, {{"theta", theta}});
  EXPECT_TRUE(report.passed);
  EXPECT_EQ(report.max_rel_error, 0.0);
}

TEST(GradCheck, NonFiniteFunctionThrows) {
  TensorD theta({1}, {0.5}, true);
  EXPECT_THROW(finite_diff_grad_check([](Tape<double>&) { return TensorD::scalar(std::nan("")); },
                                      {{"theta", theta}}),
               NumericError);
}

class OperatorGradient : public ::testing::TestWithParam<testing::GradCase> {};

TEST_P(OperatorGradient, MatchesCentralDifferences) {
  const auto& c = GetParam();
  const auto report = testing::run_case(c);
  EXPECT_TRUE(report.passed) << c.name << " max rel error " << report.max_rel_error;
  EXPECT_LT(report.max_rel_error, c.linear ? 1e-5 : 1e-4);
}

INSTANTIATE_TEST_SUITE_P(AllOps, OperatorGradient, ::testing::ValuesIn(testing::operator_cases()),
                         [](const auto& info) { return info.param.name; });

TEST(EncoderGradient, TinyEncoderWithNtXent) {
  const auto report = testing::run_encoder_check(testing::tiny_config(), 0, 3);
  EXPECT_TRUE(report.passed) << "max rel error " << report.max_rel_error;
}

}  // namespace
}  // namespace omnic

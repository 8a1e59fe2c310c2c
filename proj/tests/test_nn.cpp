#include <gtest/gtest.h>

#include <sstream>

#include "support.hpp"
#include "tdm/errors.hpp"
#include "tdm/nn.hpp"

namespace tdm {
namespace {

using nn::Activation;
using testing::max_param_error;
using testing::uniform_matrix;

Mlp single_layer(Eigen::MatrixXd w, Eigen::VectorXd b, Activation act = Activation::kLinear) {
  Mlp net;
  net.layers.push_back({std::move(w), std::move(b), act});
  return net;
}

TEST(MlpForward, ZeroWeightsPassBias) {
  const Mlp net = single_layer(Eigen::MatrixXd::Zero(2, 3), Eigen::Vector2d(0.5, -0.5));
  const Eigen::VectorXd y = nn::forward(net, Eigen::VectorXd(Eigen::Vector3d(1, 2, 3)));
  EXPECT_EQ(y, Eigen::Vector2d(0.5, -0.5));
}

TEST(MlpForward, HiddenRectifierClipsNegatives) {
  Mlp net = single_layer(Eigen::Matrix2d::Identity(), Eigen::Vector2d::Zero(), Activation::kRelu);
  net.layers.push_back({Eigen::Matrix2d::Identity(), Eigen::Vector2d::Zero(), Activation::kLinear});
  EXPECT_EQ(nn::forward(net, Eigen::VectorXd(Eigen::Vector2d(-1, 2))), Eigen::Vector2d(0, 2));
}

TEST(MlpForward, MatchesPerNeuronLoop) {
  Rng rng(11);
  const std::vector<int> hidden = {8};
  const Mlp net = nn::make_mlp<double>(3, hidden, 2, Activation::kTanh, rng);
  const Eigen::VectorXd x = uniform_matrix(3, 1, rng).col(0);

  std::vector<double> h(8);
  for (int i = 0; i < 8; ++i) {
    double z = net.layers[0].bias(i);
    for (int j = 0; j < 3; ++j) z += net.layers[0].weight(i, j) * x(j);
    h[i] = z > 0 ? z : 0.0;
  }
  const Eigen::VectorXd y = nn::forward(net, x);
  for (int i = 0; i < 2; ++i) {
    double z = net.layers[1].bias(i);
    for (int j = 0; j < 8; ++j) z += net.layers[1].weight(i, j) * h[j];
    EXPECT_NEAR(y(i), std::tanh(z), 1e-12);
  }
}

TEST(MlpForward, RejectsWrongInputDimension) {
  Rng rng(1);
  const std::vector<int> hidden = {4};
  const Mlp net = nn::make_mlp<double>(3, hidden, 2, Activation::kLinear, rng);
  try {
    nn::forward(net, Eigen::VectorXd(Eigen::Vector2d(1, 2)));
    FAIL() << "expected a shape error";
  } catch (const ShapeError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find('3'), std::string::npos);
    EXPECT_NE(msg.find('2'), std::string::npos);
  }
}

TEST(MlpForward, BatchColumnsMatchSingleEvaluations) {
  Rng rng(5);
  const std::vector<int> hidden = {16, 16};
  const Mlp net = nn::make_mlp<double>(4, hidden, 3, Activation::kTanh, rng);
  const Eigen::MatrixXd x = uniform_matrix(4, 7, rng);
  const Eigen::MatrixXd y = nn::forward(net, Eigen::Ref<const Eigen::MatrixXd>(x));
  for (Eigen::Index j = 0; j < x.cols(); ++j)
    EXPECT_TRUE(y.col(j).isApprox(nn::forward(net, Eigen::VectorXd(x.col(j))), 1e-14));
}

TEST(MlpBackward, ZeroUpstreamGivesZeroGradients) {
  Rng rng(2);
  const std::vector<int> hidden = {5};
  const Mlp net = nn::make_mlp<double>(3, hidden, 2, Activation::kTanh, rng);
  const Eigen::MatrixXd x = uniform_matrix(3, 4, rng);
  const auto g = nn::backward(net, Eigen::Ref<const Eigen::MatrixXd>(x),
                              Eigen::Ref<const Eigen::MatrixXd>(Eigen::MatrixXd::Zero(2, 4)));
  for (const auto& l : g.params.layers) {
    EXPECT_TRUE(l.weight.isZero(0.0));
    EXPECT_TRUE(l.bias.isZero(0.0));
  }
  EXPECT_TRUE(g.input.isZero(0.0));
}

TEST(MlpBackward, LinearLayerClosedForm) {
  const Mlp net = single_layer(Eigen::Matrix2d::Identity(), Eigen::Vector2d::Zero());
  const Eigen::MatrixXd x = Eigen::Vector2d(1, 2);
  const Eigen::MatrixXd u = Eigen::Vector2d(3, 4);
  const auto g = nn::backward(net, Eigen::Ref<const Eigen::MatrixXd>(x), Eigen::Ref<const Eigen::MatrixXd>(u));
  Eigen::Matrix2d expected;
  expected << 3, 6, 4, 8;
  EXPECT_EQ(g.params.layers[0].weight, expected);
  EXPECT_EQ(g.params.layers[0].bias, Eigen::Vector2d(3, 4));
  EXPECT_EQ(g.input, Eigen::MatrixXd(Eigen::Vector2d(3, 4)));
}

TEST(MlpBackward, MatchesFiniteDifferences) {
  Rng rng(17);
  const std::vector<int> hidden = {16, 16};
  for (int probe = 0; probe < 100; ++probe) {
    Mlp net = nn::make_mlp<double>(4, hidden, 3, probe % 2 ? Activation::kTanh : Activation::kLinear, rng);
    Eigen::MatrixXd x = uniform_matrix(4, 1, rng);
    while (testing::relu_margin(net, x) < testing::kKinkMargin) x = uniform_matrix(4, 1, rng);
    const Eigen::MatrixXd u = uniform_matrix(3, 1, rng);
    const auto g = nn::backward(net, Eigen::Ref<const Eigen::MatrixXd>(x), Eigen::Ref<const Eigen::MatrixXd>(u));
    auto f = [&] { return u.col(0).dot(nn::forward(net, Eigen::VectorXd(x.col(0)))); };
    ASSERT_LT(max_param_error(net, g.params, f), 1e-4) << "probe " << probe;

    Eigen::MatrixXd xv = x;
    auto fx = [&] { return u.col(0).dot(nn::forward(net, Eigen::VectorXd(xv.col(0)))); };
    for (int i = 0; i < 4; ++i)
      ASSERT_LT(testing::relative_error(g.input(i, 0), testing::central_difference(fx, xv(i, 0))), 1e-4);
  }
}

TEST(MlpBackward, RejectsWrongUpstream) {
  Rng rng(2);
  const std::vector<int> hidden = {5};
  const Mlp net = nn::make_mlp<double>(3, hidden, 2, Activation::kLinear, rng);
  const Eigen::MatrixXd x = uniform_matrix(3, 1, rng);
  EXPECT_THROW(nn::backward(net, Eigen::Ref<const Eigen::MatrixXd>(x),
                            Eigen::Ref<const Eigen::MatrixXd>(Eigen::MatrixXd::Zero(3, 1))),
               ShapeError);
}

TEST(MlpBackward, DeterministicAcrossCalls) {
  Rng a(9), b(9);
  const std::vector<int> hidden = {8};
  const Mlp n1 = nn::make_mlp<double>(3, hidden, 2, Activation::kTanh, a);
  const Mlp n2 = nn::make_mlp<double>(3, hidden, 2, Activation::kTanh, b);
  const Eigen::MatrixXd x = Eigen::MatrixXd::Constant(3, 2, 0.3);
  const Eigen::MatrixXd u = Eigen::MatrixXd::Constant(2, 2, -0.7);
  const auto g1 = nn::backward(n1, Eigen::Ref<const Eigen::MatrixXd>(x), Eigen::Ref<const Eigen::MatrixXd>(u));
  const auto g2 = nn::backward(n2, Eigen::Ref<const Eigen::MatrixXd>(x), Eigen::Ref<const Eigen::MatrixXd>(u));
  for (std::size_t k = 0; k < g1.params.layers.size(); ++k) {
    EXPECT_EQ(g1.params.layers[k].weight, g2.params.layers[k].weight);
    EXPECT_EQ(g1.params.layers[k].bias, g2.params.layers[k].bias);
  }
}

TEST(Adam, ZeroGradientLeavesParamsAndCountsStep) {
  Rng rng(3);
  const std::vector<int> hidden = {4};
  Mlp net = nn::make_mlp<double>(2, hidden, 1, Activation::kLinear, rng);
  const Mlp before = net;
  Adam state = Adam::for_params(net);
  nn::adam_step(net, net.zeros_like(), state, 1e-3);
  EXPECT_EQ(state.step, 1);
  for (std::size_t k = 0; k < net.layers.size(); ++k) EXPECT_EQ(net.layers[k].weight, before.layers[k].weight);
}

TEST(Adam, FirstStepMovesByLearningRateTimesSign) {
  Mlp w = single_layer(Eigen::MatrixXd::Constant(1, 1, 0.0), Eigen::VectorXd::Zero(1));
  Mlp g = single_layer(Eigen::MatrixXd::Constant(1, 1, 2.5), Eigen::VectorXd::Constant(1, -0.01));
  Adam state = Adam::for_params(w);
  nn::adam_step(w, g, state, 0.1);
  EXPECT_NEAR(w.layers[0].weight(0, 0), -0.1, 1e-7);
  EXPECT_NEAR(w.layers[0].bias(0), 0.1, 1e-5);
}

TEST(Adam, ConvergesOnQuadratic) {
  Mlp w = single_layer(Eigen::MatrixXd::Zero(1, 1), Eigen::VectorXd::Zero(1));
  Adam state = Adam::for_params(w);
  for (int i = 0; i < 100; ++i) {
    Mlp g = w.zeros_like();
    g.layers[0].weight(0, 0) = 2.0 * (w.layers[0].weight(0, 0) - 3.0);
    nn::adam_step(w, g, state, 0.1);
  }
  EXPECT_LT(std::abs(w.layers[0].weight(0, 0) - 3.0), 0.05);
}

TEST(Adam, SecondMomentStaysNonNegative) {
  Rng rng(4);
  const std::vector<int> hidden = {6};
  Mlp net = nn::make_mlp<double>(3, hidden, 2, Activation::kLinear, rng);
  Adam state = Adam::for_params(net);
  for (int i = 0; i < 10; ++i) {
    Mlp g = net;
    g.for_each_block([&](auto& b) { b = uniform_matrix(b.rows(), b.cols(), rng, -5, 5); });
    nn::adam_step(net, g, state, 1e-2);
  }
  for (const auto& l : state.second_moment.layers) {
    EXPECT_GE(l.weight.minCoeff(), 0.0);
    EXPECT_GE(l.bias.minCoeff(), 0.0);
  }
}

TEST(Adam, RejectsNonFiniteGradientAndBadRate) {
  Mlp w = single_layer(Eigen::MatrixXd::Zero(1, 1), Eigen::VectorXd::Zero(1));
  Adam state = Adam::for_params(w);
  Mlp g = w.zeros_like();
  g.layers[0].bias(0) = std::numeric_limits<double>::quiet_NaN();
  EXPECT_THROW(nn::adam_step(w, g, state, 0.1), NumericError);
  EXPECT_THROW(nn::adam_step(w, w.zeros_like(), state, 0.0), std::invalid_argument);
}

TEST(Adam, RejectsShapeMismatch) {
  Mlp w = single_layer(Eigen::MatrixXd::Zero(1, 1), Eigen::VectorXd::Zero(1));
  Adam state = Adam::for_params(w);
  const Mlp other = single_layer(Eigen::MatrixXd::Zero(2, 1), Eigen::VectorXd::Zero(2));
  EXPECT_THROW(nn::adam_step(w, other, state, 0.1), ShapeError);
}

TEST(Polyak, DegenerateCoefficients) {
  const Mlp source = single_layer(Eigen::MatrixXd::Constant(1, 1, 1.0), Eigen::VectorXd::Constant(1, 2.0));
  Mlp target = source.zeros_like();
  nn::polyak_update(target, source, 1.0);
  EXPECT_EQ(target.layers[0].weight(0, 0), 0.0);
  nn::polyak_update(target, source, 0.0);
  EXPECT_EQ(target.layers[0].weight(0, 0), 1.0);
  EXPECT_EQ(target.layers[0].bias(0), 2.0);
}

TEST(Polyak, ScalarArithmetic) {
  nn::TargetCopy<double> target{single_layer(Eigen::MatrixXd::Zero(1, 1), Eigen::VectorXd::Zero(1)), 0.999};
  const Mlp source = single_layer(Eigen::MatrixXd::Ones(1, 1), Eigen::VectorXd::Ones(1));
  nn::polyak_update(target, source);
  EXPECT_NEAR(target.params.layers[0].weight(0, 0), 0.001, 1e-15);
}

TEST(Polyak, ContractsTowardFixedSource) {
  Rng rng(8);
  const std::vector<int> hidden = {4};
  const Mlp source = nn::make_mlp<double>(3, hidden, 2, Activation::kLinear, rng);
  Mlp target = nn::make_mlp<double>(3, hidden, 2, Activation::kLinear, rng);
  auto dist = [&] {
    double d = 0.0;
    for (std::size_t k = 0; k < source.layers.size(); ++k)
      d += (target.layers[k].weight - source.layers[k].weight).squaredNorm() +
           (target.layers[k].bias - source.layers[k].bias).squaredNorm();
    return std::sqrt(d);
  };
  const double rho = 0.9;
  const double d0 = dist();
  for (int k = 1; k <= 20; ++k) {
    nn::polyak_update(target, source, rho);
    EXPECT_LE(dist(), std::pow(rho, k) * d0 * (1 + 1e-12));
  }
}

TEST(Polyak, TargetLagBoundAtDefaultCoefficient) {
  Rng rng(12);
  const std::vector<int> hidden = {4};
  const Mlp source = nn::make_mlp<double>(3, hidden, 2, Activation::kLinear, rng);
  Mlp target = nn::make_mlp<double>(3, hidden, 2, Activation::kLinear, rng);
  const Mlp before = target;
  nn::polyak_update(target, source, 0.999);
  for (std::size_t k = 0; k < source.layers.size(); ++k) {
    const double gap = (source.layers[k].weight - before.layers[k].weight).cwiseAbs().maxCoeff();
    const double moved = (target.layers[k].weight - before.layers[k].weight).cwiseAbs().maxCoeff();
    EXPECT_LE(moved, 0.001 * gap * (1 + 1e-9));
  }
}

TEST(Polyak, RejectsShapeMismatchAndBadRho) {
  Mlp a = single_layer(Eigen::MatrixXd::Zero(1, 1), Eigen::VectorXd::Zero(1));
  const Mlp b = single_layer(Eigen::MatrixXd::Zero(2, 1), Eigen::VectorXd::Zero(2));
  EXPECT_THROW(nn::polyak_update(a, b, 0.5), ShapeError);
  EXPECT_THROW(nn::polyak_update(a, a, 1.5), std::invalid_argument);
}

TEST(Init, UniformWithinFanInBoundAndScaledFinalLayer) {
  Rng rng(21);
  const std::vector<int> hidden = {32};
  const Mlp net = nn::make_mlp<double>(9, hidden, 4, Activation::kTanh, rng, 0.1);
  EXPECT_LE(net.layers[0].weight.cwiseAbs().maxCoeff(), 1.0 / 3.0);
  EXPECT_LE(net.layers[1].weight.cwiseAbs().maxCoeff(), 0.1 / std::sqrt(32.0));
  EXPECT_EQ(net.layers[0].activation, Activation::kRelu);
  EXPECT_EQ(net.layers[1].activation, Activation::kTanh);
}

TEST(Checkpoint, RoundTripIsBitExact) {
  Rng rng(6);
  const std::vector<int> hidden = {7, 5};
  const Mlp net = nn::make_mlp<double>(3, hidden, 2, Activation::kTanh, rng);
  std::stringstream ss;
  nn::write_mlp(ss, net);
  const std::string header = ss.str().substr(0, ss.str().find("\n\n"));
  EXPECT_EQ(header, "3 7 relu\n7 5 relu\n5 2 tanh");
  const Mlp back = nn::read_mlp<double>(ss);
  ASSERT_TRUE(nn::same_shape(net, back));
  for (std::size_t k = 0; k < net.layers.size(); ++k) {
    EXPECT_EQ(net.layers[k].weight, back.layers[k].weight);
    EXPECT_EQ(net.layers[k].bias, back.layers[k].bias);
    EXPECT_EQ(net.layers[k].activation, back.layers[k].activation);
  }
}

TEST(Checkpoint, RejectsTruncatedAndMalformed) {
  Rng rng(6);
  const std::vector<int> hidden = {3};
  const Mlp net = nn::make_mlp<double>(2, hidden, 1, Activation::kLinear, rng);
  std::stringstream ss;
  nn::write_mlp(ss, net);
  std::string data = ss.str();
  data.resize(data.size() - 4);
  std::stringstream truncated(data);
  EXPECT_THROW(nn::read_mlp<double>(truncated), std::runtime_error);
  std::stringstream broken("2 3 relu\n4 1 linear\n\n");
  EXPECT_THROW(nn::read_mlp<double>(broken), ShapeError);
}

}  // namespace
}  // namespace tdm

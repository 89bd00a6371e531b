#include <gtest/gtest.h>

#include <cmath>

#include "lseg/nn/blocks.hpp"
#include "lseg/nn/conv.hpp"
#include "lseg/nn/layers.hpp"
#include "support.hpp"

namespace lseg::nn {
namespace {

using testing::random_tensor64;

Conv2d<double> ones_conv(ConvOptions o) {
  Rng rng(0);
  Conv2d<double> conv(o, rng);
  conv.weight() = Tensor64::full(conv.weight().shape(), 1.0);
  conv.bias() = Tensor64::zeros(conv.bias().shape());
  return conv;
}

TEST(Conv2d, OnesKernelOnOnesImage) {
  auto conv = ones_conv({1, 1, 3, 1, 1, 1, true});
  const auto y = conv.infer(Tensor64::full({1, 1, 3, 3}, 1.0));
  const Tensor64 expected({1, 1, 3, 3}, {4, 6, 4, 6, 9, 6, 4, 6, 4});
  EXPECT_EQ(y, expected);
}

TEST(Conv2d, UnitPointwiseKernelIsIdentity) {
  auto conv = ones_conv({1, 1, 1, 1, 0, 1, true});
  Rng rng(2);
  const auto x = random_tensor64({2, 1, 4, 3}, rng);
  EXPECT_EQ(conv.infer(x), x);
}

TEST(Conv2d, DilatedTapsSampleEveryOtherPixel) {
  auto conv = ones_conv({1, 1, 3, 1, 0, 2, true});
  Tensor64 x({1, 1, 5, 5});
  for (std::size_t i = 0; i < 25; ++i) x[i] = static_cast<double>(i);
  double expected = 0.0;
  for (std::size_t r : {0, 2, 4})
    for (std::size_t c : {0, 2, 4}) expected += x[r * 5 + c];
  const auto y = conv.infer(x);
  ASSERT_EQ(y.shape(), (Shape{1, 1, 1, 1}));
  EXPECT_EQ(y[0], expected);
}

TEST(Conv2d, ShapeLawAndErrors) {
  Rng rng(1);
  Conv2d<double> conv({3, 5, 3, 2, 1, 1, true}, rng);
  EXPECT_EQ(conv.output_extent(9, 8), (std::pair<std::size_t, std::size_t>{5, 4}));
  EXPECT_THROW(conv.infer(Tensor64({1, 2, 9, 8})), ShapeError);
  Conv2d<double> big({1, 1, 5, 1, 0, 1, true}, rng);
  EXPECT_THROW(big.infer(Tensor64({1, 1, 3, 3})), ShapeError);
}

TEST(Conv2d, ForwardAndInferAgree) {
  Rng rng(4);
  Conv2d<double> conv({2, 3, 3, 1, 1, 1, true}, rng);
  const auto x = random_tensor64({2, 2, 6, 5}, rng);
  EXPECT_EQ(conv.forward(x), conv.infer(x));
}

TEST(ConvTranspose2d, DisjointScatterBlocks) {
  Rng rng(0);
  ConvTranspose2d<double> up({1, 1, 2, 2, 0, 1, true}, rng);
  up.weight() = Tensor64::full(up.weight().shape(), 1.0);
  up.bias() = Tensor64::zeros(up.bias().shape());
  EXPECT_EQ(up.infer(Tensor64::full({1, 1, 2, 2}, 1.0)), Tensor64::full({1, 1, 4, 4}, 1.0));
}

TEST(ConvTranspose2d, UnitPointwiseKernelIsIdentity) {
  Rng rng(0);
  ConvTranspose2d<double> up({1, 1, 1, 1, 0, 1, true}, rng);
  up.weight() = Tensor64::full(up.weight().shape(), 1.0);
  up.bias() = Tensor64::zeros(up.bias().shape());
  const auto x = random_tensor64({1, 1, 3, 3}, rng);
  EXPECT_EQ(up.infer(x), x);
}

TEST(ConvTranspose2d, IsAdjointOfConv) {
  Rng rng(8);
  for (const ConvOptions o : {ConvOptions{2, 3, 3, 1, 1, 1, false}, ConvOptions{3, 2, 3, 2, 1, 1, false},
                              ConvOptions{2, 2, 2, 2, 0, 1, false}, ConvOptions{2, 2, 3, 1, 2, 2, false}}) {
    Conv2d<double> conv(o, rng);
    ConvTranspose2d<double> up({o.out_channels, o.in_channels, o.kernel, o.stride, o.padding, o.dilation, false}, rng);
    // Same tensor: Conv2d is Cout x Cin x k x k, ConvTranspose2d is Cin' x Cout' x k x k.
    up.weight() = conv.weight();
    // Pick the input extent whose transposed image has the same extent.
    std::size_t size = 8;
    if (up.output_extent(conv.output_extent(size, size).first, 1).first != size) ++size;
    const auto x = random_tensor64({1, o.in_channels, size, size}, rng);
    const auto y_shape = conv.infer(x).shape();
    const auto y = random_tensor64(y_shape, rng);
    const auto tx = up.infer(y);
    ASSERT_EQ(tx.shape(), x.shape());
    EXPECT_NEAR(dot(conv.infer(x), y), dot(x, tx), 1e-10);
  }
}

TEST(MaxPool2d, PicksWindowMaximumAndRoutesGradient) {
  MaxPool2d<double> pool;
  const Tensor64 x({1, 1, 2, 2}, {1, 2, 3, 4});
  EXPECT_EQ(pool.forward(x), Tensor64({1, 1, 1, 1}, {4}));
  EXPECT_EQ(pool.backward(Tensor64({1, 1, 1, 1}, {1})), Tensor64({1, 1, 2, 2}, {0, 0, 0, 1}));
}

TEST(MaxPool2d, ConstantInputConstantOutput) {
  MaxPool2d<double> pool;
  EXPECT_EQ(pool.infer(Tensor64::full({1, 2, 4, 6}, 3.5)), Tensor64::full({1, 2, 2, 3}, 3.5));
}

TEST(MaxPool2d, OddExtentAsksForPaddingOrCropping) {
  MaxPool2d<double> pool;
  try {
    pool.infer(Tensor64({1, 1, 3, 4}));
    FAIL();
  } catch (const ShapeError& e) {
    const std::string msg = e.what();
    EXPECT_TRUE(msg.find("pad") != std::string::npos || msg.find("crop") != std::string::npos) << msg;
  }
}

TEST(Activations, SigmoidClosedForm) {
  EXPECT_NEAR(sigmoid(Tensor64({1}, {std::log(3.0)}))[0], 0.75, 1e-15);
  EXPECT_EQ(sigmoid(Tensor64({1}, {0.0}))[0], 0.5);
}

TEST(Activations, SigmoidStaysInsideOpenInterval) {
  const auto y = sigmoid(Tensor({4}, {-200.0f, -60.0f, 60.0f, 200.0f}));
  for (float v : y.values()) {
    EXPECT_GT(v, 0.0f);
    EXPECT_LT(v, 1.0f);
  }
}

TEST(Activations, SoftmaxClosedForms) {
  const auto even = softmax(Tensor64({1, 2}, {0.0, 0.0}));
  EXPECT_EQ(even, Tensor64({1, 2}, {0.5, 0.5}));
  const auto odds = softmax(Tensor64({1, 2}, {std::log(1.0), std::log(3.0)}));
  EXPECT_NEAR(odds[0], 0.25, 1e-15);
  EXPECT_NEAR(odds[1], 0.75, 1e-15);
}

TEST(Activations, SoftmaxSumsToOneOverChannels) {
  Rng rng(3);
  const auto y = softmax(random_tensor64({2, 4, 3, 3}, rng, -5, 5));
  for (std::size_t n = 0; n < 2; ++n)
    for (std::size_t p = 0; p < 9; ++p) {
      double s = 0.0;
      for (std::size_t c = 0; c < 4; ++c) s += y[(n * 4 + c) * 9 + p];
      EXPECT_NEAR(s, 1.0, 1e-12);
    }
}

TEST(Activations, ReluClampsNegatives) {
  EXPECT_EQ(relu(Tensor64({3}, {-1.0, 0.0, 2.0})), Tensor64({3}, {0.0, 0.0, 2.0}));
}

TEST(Concat, ShapeLawAndSplitAdjoint) {
  Rng rng(6);
  const auto a = random_tensor64({2, 2, 3, 3}, rng);
  const auto b = random_tensor64({2, 3, 3, 3}, rng);
  const auto c = concat_channels(a, b);
  EXPECT_EQ(c.shape(), (Shape{2, 5, 3, 3}));
  const auto [ga, gb] = split_channels(Tensor64::full(c.shape(), 1.0), 2);
  EXPECT_EQ(ga, Tensor64::full(a.shape(), 1.0));
  EXPECT_EQ(gb, Tensor64::full(b.shape(), 1.0));
  const auto [ra, rb] = split_channels(c, 2);
  EXPECT_EQ(ra, a);
  EXPECT_EQ(rb, b);
}

TEST(BatchNorm2d, ConstantInputNormalizesToZero) {
  BatchNorm2d<double> bn(2);
  bn.set_training(true);
  const auto y = bn.forward(Tensor64::full({2, 2, 3, 3}, 4.0));
  for (double v : y.values()) EXPECT_NEAR(v, 0.0, 1e-12);
}

TEST(BatchNorm2d, PopulationVarianceConvention) {
  BatchNorm2d<double> bn(1);
  bn.set_training(true);
  const auto y = bn.forward(Tensor64({2, 1, 1, 1}, {1.0, 3.0}));
  EXPECT_NEAR(y[0], -1.0, 1e-5);
  EXPECT_NEAR(y[1], 1.0, 1e-5);
}

TEST(BatchNorm2d, AffineParametersApply) {
  BatchNorm2d<double> bn(1);
  bn.set_training(true);
  const Tensor64 x({2, 1, 1, 1}, {1.0, 3.0});
  const auto xhat = bn.forward(x);
  bn.gamma() = Tensor64({1}, {2.0});
  bn.beta() = Tensor64({1}, {5.0});
  const auto y = bn.forward(x);
  for (std::size_t i = 0; i < 2; ++i) EXPECT_NEAR(y[i], 2.0 * xhat[i] + 5.0, 1e-12);
}

TEST(BatchNorm2d, RunningStatisticsAndEvalMode) {
  BatchNorm2d<double> bn(1, 1e-5, 0.1);
  bn.set_training(true);
  bn.forward(Tensor64({2, 1, 1, 1}, {1.0, 3.0}));
  EXPECT_NEAR(bn.running_mean()[0], 0.2, 1e-12);
  EXPECT_NEAR(bn.running_var()[0], 0.9 + 0.1 * 1.0, 1e-12);
  bn.set_training(false);
  const Tensor64 x({1, 1, 1, 1}, {2.0});
  const double expected = (2.0 - 0.2) / std::sqrt(1.0 + 1e-5);
  EXPECT_NEAR(bn.forward(x)[0], expected, 1e-12);
  EXPECT_EQ(bn.infer(x), bn.forward(x));
}

TEST(BatchNorm2d, RunningStatsAreBuffers) {
  BatchNorm2d<double> bn(3);
  std::size_t trainable = 0, buffers = 0;
  for (const auto& p : bn.parameters()) (p.grad ? trainable : buffers)++;
  EXPECT_EQ(trainable, 2u);
  EXPECT_EQ(buffers, 2u);
}

TEST(DenseBlock, EmptyBlockIsIdentity) {
  Rng rng(1);
  DenseBlock<double> block({3, 0, 4}, rng);
  const auto x = random_tensor64({1, 3, 4, 4}, rng);
  EXPECT_EQ(block.forward(x), x);
}

TEST(DenseBlock, GrowthRecurrence) {
  Rng rng(1);
  DenseBlock<double> block({4, 3, 2}, rng);
  EXPECT_EQ(block.config().out_channels(), 10u);
  const auto x = random_tensor64({1, 4, 4, 4}, rng);
  const auto y = block.infer(x);
  EXPECT_EQ(y.shape(), (Shape{1, 10, 4, 4}));
  const auto [head, tail] = split_channels(y, 4);
  EXPECT_EQ(head, x);
}

TEST(Transition, IdentityConvOnConstantInput) {
  Rng rng(1);
  Transition<double> tr(2, 2, rng);
  tr.conv().weight() = Tensor64({2, 2, 1, 1}, {1, 0, 0, 1});
  tr.conv().bias() = Tensor64::zeros({2});
  EXPECT_EQ(tr.infer(Tensor64::full({1, 2, 2, 2}, 3.0)), Tensor64::full({1, 2, 1, 1}, 3.0));
}

TEST(Transition, TiledBlockAveragesPerWindow) {
  Rng rng(1);
  Transition<double> tr(1, 1, rng);
  tr.conv().weight() = Tensor64({1, 1, 1, 1}, {1});
  tr.conv().bias() = Tensor64::zeros({1});
  Tensor64 x({1, 1, 4, 4});
  for (std::size_t r = 0; r < 4; ++r)
    for (std::size_t c = 0; c < 4; ++c) x.at(0, 0, r, c) = static_cast<double>(1 + (r % 2) * 2 + (c % 2));
  EXPECT_EQ(tr.infer(x), Tensor64::full({1, 1, 2, 2}, 2.5));
}

TEST(GlobalAvgPool, MeansAndAdjoint) {
  GlobalAvgPool<double> gap;
  EXPECT_EQ(gap.forward(Tensor64::full({1, 1, 3, 3}, 7.0)), Tensor64::full({1, 1}, 7.0));
  EXPECT_EQ(gap.forward(Tensor64({1, 1, 2, 2}, {0, 2, 4, 6})), Tensor64({1, 1}, {3.0}));
  EXPECT_EQ(gap.backward(Tensor64({1, 1}, {8.0})), Tensor64::full({1, 1, 2, 2}, 2.0));
}

TEST(SEBlock, ZeroWeightsGateAtOneHalf) {
  Rng rng(2);
  SEBlock<double> se({4, 2}, rng);
  se.squeeze_weight() = Tensor64::zeros(se.squeeze_weight().shape());
  se.excite_weight() = Tensor64::zeros(se.excite_weight().shape());
  const auto x = random_tensor64({1, 4, 3, 3}, rng);
  EXPECT_EQ(se.infer(x), scale(x, 0.5));
}

TEST(SEBlock, SaturatedGateIsIdentity) {
  Rng rng(2);
  SEBlock<double> se({2, 1}, rng);
  se.squeeze_weight() = Tensor64::full(se.squeeze_weight().shape(), 1.0);
  se.excite_weight() = Tensor64::full(se.excite_weight().shape(), 1e3);
  const auto x = random_tensor64({1, 2, 3, 3}, rng, 0.5, 1.0);
  const auto y = se.infer(x);
  for (std::size_t i = 0; i < x.size(); ++i) EXPECT_NEAR(y[i], x[i], 1e-12);
}

TEST(SEBlock, GatesInOpenUnitIntervalAndBottleneckWidth) {
  Rng rng(4);
  EXPECT_EQ((SEBlockConfig{3, 16}.bottleneck()), 1u);
  EXPECT_EQ((SEBlockConfig{32, 4}.bottleneck()), 8u);
  SEBlock<double> se({8, 4}, rng);
  const auto g = se.gate(random_tensor64({2, 8, 3, 3}, rng, -3, 3));
  for (double v : g.values()) {
    EXPECT_GT(v, 0.0);
    EXPECT_LT(v, 1.0);
  }
}

TEST(ASPP, BranchArithmetic) {
  Rng rng(1);
  ASPPConfig cfg;
  cfg.in_channels = 3;
  cfg.rates = {1, 2, 4};
  cfg.branch_channels = 8;
  cfg.out_channels = 16;
  ASPP<double> aspp(cfg, rng);
  EXPECT_EQ(cfg.concat_channels(), 32u);
  const auto x = random_tensor64({1, 3, 8, 8}, rng);
  EXPECT_EQ(aspp.branches(x).shape(), (Shape{1, 32, 8, 8}));
  EXPECT_EQ(aspp.infer(x).shape(), (Shape{1, 16, 8, 8}));
}

TEST(ASPP, ConstantInputWithKnownWeights) {
  Rng rng(1);
  ASPPConfig cfg;
  cfg.in_channels = 1;
  cfg.rates = {1};
  cfg.branch_channels = 1;
  cfg.out_channels = 1;
  cfg.image_pooling = false;
  ASPP<double> aspp(cfg, rng);
  aspp.branch_conv(0).weight() = Tensor64::full({1, 1, 3, 3}, 1.0);
  aspp.branch_conv(0).bias() = Tensor64::zeros({1});
  aspp.fuse_conv().weight() = Tensor64({1, 1, 1, 1}, {0.5});
  aspp.fuse_conv().bias() = Tensor64({1}, {1.0});
  // Interior pixels see 9 taps of value 2: relu(18) * 0.5 + 1 = 10.
  const auto y = aspp.infer(Tensor64::full({1, 1, 5, 5}, 2.0));
  EXPECT_EQ(y.at(0, 0, 2, 2), 10.0);
  EXPECT_EQ(y.at(0, 0, 1, 3), 10.0);
}

TEST(ASPP, PoolingBranchBroadcastsConstant) {
  const auto b = broadcast_spatial(Tensor64({1, 2, 1, 1}, {3.0, -1.0}), 2, 3);
  EXPECT_EQ(b.shape(), (Shape{1, 2, 2, 3}));
  for (std::size_t i = 0; i < 6; ++i) {
    EXPECT_EQ(b[i], 3.0);
    EXPECT_EQ(b[6 + i], -1.0);
  }
}

TEST(Sequential, ParameterNamesArePrefixed) {
  Rng rng(0);
  Sequential<double> seq;
  seq.emplace<Conv2d<double>>("conv", ConvOptions{1, 2, 3, 1, 1, 1, true}, rng);
  seq.emplace<BatchNorm2d<double>>("bn", 2);
  std::vector<std::string> names;
  for (const auto& p : seq.parameters()) names.push_back(p.name);
  EXPECT_EQ(names, (std::vector<std::string>{"conv.weight", "conv.bias", "bn.gamma", "bn.beta", "bn.running_mean",
                                             "bn.running_var"}));
}

class LayerGradient : public ::testing::TestWithParam<std::size_t> {
 protected:
  static const std::vector<testing::GradientCase>& cases() {
    static const auto all = testing::layer_gradient_cases(2024);
    return all;
  }
};

TEST_P(LayerGradient, MatchesFiniteDifferences) {
  ASSERT_LT(GetParam(), cases().size());
  const auto& c = cases()[GetParam()];
  EXPECT_LT(c.error, 1e-4) << c.name;
}

INSTANTIATE_TEST_SUITE_P(AllLayers, LayerGradient, ::testing::Range<std::size_t>(0, 32));

TEST(LayerGradient, CaseCountIsPinned) { EXPECT_EQ(testing::layer_gradient_cases(1).size(), 32u); }

TEST(LayerGradient, HoldsAcrossSeeds) {
  for (std::uint64_t seed : {1u, 77u}) {
    for (const auto& c : testing::layer_gradient_cases(seed)) EXPECT_LT(c.error, 1e-4) << c.name << " seed " << seed;
  }
}

}  // namespace
}  // namespace lseg::nn

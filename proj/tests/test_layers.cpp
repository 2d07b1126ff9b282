#include <gtest/gtest.h>

#include <cmath>

#include "gradcheck.hpp"
#include "groupemo/nn/adam.hpp"
#include "groupemo/nn/augment.hpp"
#include "groupemo/nn/layer.hpp"
#include "groupemo/nn/loss.hpp"
#include "groupemo/nn/model.hpp"

using namespace groupemo;
using namespace groupemo::nn;

namespace {

Tensor<double> random_tensor(const Shape& shape, Rng& rng) {
  Tensor<double> t(shape);
  for (auto& v : t.values()) v = rng.uniform(-1.0, 1.0);
  return t;
}

// Straight nested loops over output cells, window taps and channels.
Tensor<double> direct_conv(const Tensor<double>& in, const Tensor<double>& w, const Tensor<double>& b,
                           std::size_t stride, std::size_t pad) {
  const std::size_t n = in.dim(0), h = in.dim(1), wd = in.dim(2), c = in.dim(3);
  const std::size_t kh = w.dim(0), kw = w.dim(1), co = w.dim(3);
  const std::size_t oh = (h + 2 * pad - kh) / stride + 1, ow = (wd + 2 * pad - kw) / stride + 1;
  Tensor<double> out({n, oh, ow, co});
  for (std::size_t s = 0; s < n; ++s)
    for (std::size_t y = 0; y < oh; ++y)
      for (std::size_t x = 0; x < ow; ++x)
        for (std::size_t o = 0; o < co; ++o) {
          double acc = b[o];
          for (std::size_t i = 0; i < kh; ++i)
            for (std::size_t j = 0; j < kw; ++j) {
              const long iy = static_cast<long>(y * stride + i) - static_cast<long>(pad);
              const long ix = static_cast<long>(x * stride + j) - static_cast<long>(pad);
              if (iy < 0 || ix < 0 || iy >= static_cast<long>(h) || ix >= static_cast<long>(wd)) continue;
              for (std::size_t ch = 0; ch < c; ++ch)
                acc += in[((s * h + iy) * wd + ix) * c + ch] * w[((i * kw + j) * c + ch) * co + o];
            }
          out[((s * oh + y) * ow + x) * co + o] = acc;
        }
  return out;
}

const LayerParams<double> kNoParams{};

}  // namespace

TEST(OutputExtent, FollowsWindowArithmetic) {
  for (std::size_t in = 3; in <= 20; ++in)
    for (std::size_t k = 1; k <= 3; ++k)
      for (std::size_t s = 1; s <= 3; ++s)
        for (std::size_t p = 0; p <= 1; ++p) {
          if (in + 2 * p < k) continue;
          EXPECT_EQ(window_out_extent(in, k, s, p), (in + 2 * p - k) / s + 1);
        }
  EXPECT_EQ(window_out_extent(64, 3, 1, 1), 64u);
  EXPECT_EQ(window_out_extent(64, 2, 2, 0), 32u);
  EXPECT_THROW(window_out_extent(1, 3, 1, 0), ShapeError);
}

TEST(OutputShape, ReferenceStackHalvesThreeTimes) {
  const auto shapes = reference_architecture().infer_shapes();
  bool saw8 = false;
  for (const auto& s : shapes)
    if (s == Shape{8, 8, 128}) saw8 = true;
  EXPECT_TRUE(saw8);
  EXPECT_EQ(shapes.back(), (Shape{3}));
}

TEST(Conv, CentreOneKernelIsIdentity) {
  Rng rng(1);
  const auto in = random_tensor({2, 5, 6, 3}, rng);
  const LayerSpec conv = LayerSpec::conv(3);
  LayerParams<double> p{Tensor<double>({3, 3, 3, 3}), Tensor<double>({3})};
  for (std::size_t c = 0; c < 3; ++c) p.weight[((1 * 3 + 1) * 3 + c) * 3 + c] = 1.0;
  EXPECT_EQ(layer_apply(conv, p, in), in);
}

TEST(Conv, WorkedCellWithStrideTwo) {
  // 5x5x3 input, two 3x3x3 filters, stride 2, zero padding 1. The top-left
  // output cell only sees input rows/cols 0..1 against filter taps 1..2:
  //   channel 0: [[2,1],[1,0]] . [[-1,1],[-1,1]] = -2
  //   channel 1: [[1,1],[2,2]] . [[-1,0],[-1,1]] = -1
  //   channel 2: [[2,2],[2,2]] . [[-1,0],[ 0,0]] = -2
  //   sum -5 plus bias b0 = 1 gives -4.
  const int x[3][5][5] = {
      {{2, 1, 2, 0, 1}, {1, 0, 2, 0, 0}, {2, 2, 2, 1, 1}, {2, 0, 2, 2, 0}, {0, 2, 2, 2, 1}},
      {{1, 1, 2, 2, 0}, {2, 2, 0, 1, 0}, {2, 0, 2, 0, 0}, {0, 1, 2, 0, 1}, {0, 1, 2, 1, 2}},
      {{2, 2, 2, 0, 0}, {2, 2, 1, 0, 2}, {0, 2, 1, 2, 2}, {2, 2, 2, 0, 0}, {1, 1, 0, 2, 0}},
  };
  const int w0[3][3][3] = {
      {{0, 0, 0}, {1, -1, 1}, {1, -1, 1}},
      {{-1, 1, 1}, {1, -1, 0}, {1, -1, 1}},
      {{1, 1, 1}, {0, -1, 0}, {0, 0, 0}},
  };
  Tensor<double> in({1, 5, 5, 3});
  for (std::size_t c = 0; c < 3; ++c)
    for (std::size_t i = 0; i < 5; ++i)
      for (std::size_t j = 0; j < 5; ++j) in[(i * 5 + j) * 3 + c] = x[c][i][j];
  LayerParams<double> p{Tensor<double>({3, 3, 3, 2}), Tensor<double>({2}, std::vector<double>{1.0, 0.0})};
  for (std::size_t c = 0; c < 3; ++c)
    for (std::size_t i = 0; i < 3; ++i)
      for (std::size_t j = 0; j < 3; ++j) p.weight[((i * 3 + j) * 3 + c) * 2 + 0] = w0[c][i][j];
  const auto out = layer_apply(LayerSpec::conv(2, 2, 1), p, in);
  ASSERT_EQ(out.shape(), (Shape{1, 3, 3, 2}));
  EXPECT_EQ(out[0], -4.0);
}

TEST(Conv, MatchesDirectConvolution) {
  Rng rng(7);
  for (std::size_t stride : {1, 2})
    for (std::size_t pad : {0, 1}) {
      const auto in = random_tensor({2, 8, 8, 3}, rng);
      LayerParams<double> p{random_tensor({3, 3, 3, 2}, rng), random_tensor({2}, rng)};
      const auto got = layer_apply(LayerSpec::conv(2, stride, pad), p, in);
      const auto want = direct_conv(in, p.weight, p.bias, stride, pad);
      ASSERT_EQ(got.shape(), want.shape());
      for (std::size_t i = 0; i < got.size(); ++i) EXPECT_NEAR(got[i], want[i], 1e-10);
    }
}

TEST(Conv, WrongChannelCountIsShapeError) {
  Rng rng(2);
  LayerParams<double> p{random_tensor({3, 3, 3, 4}, rng), random_tensor({4}, rng)};
  EXPECT_THROW(layer_apply(LayerSpec::conv(4), p, random_tensor({1, 8, 8, 2}, rng)), ShapeError);
}

TEST(MaxPool, TakesBlockMaximum) {
  Tensor<double> in({1, 2, 2, 1}, std::vector<double>{1, 2, 3, 4});
  const auto out = layer_apply(LayerSpec::maxpool(), kNoParams, in);
  ASSERT_EQ(out.shape(), (Shape{1, 1, 1, 1}));
  EXPECT_EQ(out[0], 4.0);
}

TEST(MaxPool, BackwardRoutesToWinner) {
  Tensor<double> in({1, 2, 2, 1}, std::vector<double>{1, 5, 3, 4});
  const auto fwd = layer_forward(LayerSpec::maxpool(), kNoParams, in, false, nullptr);
  const auto g = layer_backward(LayerSpec::maxpool(), kNoParams, fwd.cache, Tensor<double>({1, 1, 1, 1}, 2.0));
  EXPECT_EQ(g.grad_in.storage(), (std::vector<double>{0, 2, 0, 0}));
}

TEST(Relu, ForwardAndBackward) {
  Tensor<double> in({1, 3}, std::vector<double>{-1, 0, 2});
  EXPECT_EQ(layer_apply(LayerSpec::relu(), kNoParams, in).storage(), (std::vector<double>{0, 0, 2}));
  Tensor<double> in2({1, 2}, std::vector<double>{-1, 2});
  const auto fwd = layer_forward(LayerSpec::relu(), kNoParams, in2, true, nullptr);
  const auto g = layer_backward(LayerSpec::relu(), kNoParams, fwd.cache, Tensor<double>({1, 2}, std::vector<double>{5, 7}));
  EXPECT_EQ(g.grad_in.storage(), (std::vector<double>{0, 7}));
}

TEST(Backward, CacheFromAnotherLayerKindIsRejected) {
  Tensor<double> in({1, 2}, std::vector<double>{-1, 2});
  const auto fwd = layer_forward(LayerSpec::relu(), kNoParams, in, true, nullptr);
  EXPECT_THROW(layer_backward(LayerSpec::softmax(), kNoParams, fwd.cache, in), Error);
}

TEST(Softmax, RowsSumToOneAndShiftInvariant) {
  Rng rng(11);
  for (int trial = 0; trial < 50; ++trial) {
    auto x = random_tensor({4, 3}, rng);
    for (auto& v : x.values()) v *= 20.0;
    const auto p = layer_apply(LayerSpec::softmax(), kNoParams, x);
    auto shifted = x;
    const double c = rng.uniform(-100.0, 100.0);
    for (auto& v : shifted.values()) v += c;
    const auto q = layer_apply(LayerSpec::softmax(), kNoParams, shifted);
    for (std::size_t r = 0; r < 4; ++r) {
      EXPECT_NEAR(p[r * 3] + p[r * 3 + 1] + p[r * 3 + 2], 1.0, 1e-9);
      for (std::size_t k = 0; k < 3; ++k) EXPECT_NEAR(p[r * 3 + k], q[r * 3 + k], 1e-9);
    }
  }
}

TEST(Dropout, InferenceIsExactIdentity) {
  Rng rng(3);
  const auto in = random_tensor({2, 10}, rng);
  Rng r(1);
  EXPECT_EQ(layer_forward(LayerSpec::dropout(0.5), kNoParams, in, false, &r).output, in);
}

TEST(Dropout, TrainingPreservesExpectation) {
  Tensor<double> in({1, 4}, std::vector<double>{1.0, -2.0, 0.5, 3.0});
  Tensor<double> mean({1, 4});
  const int trials = 20000;
  Rng rng(17);
  for (int t = 0; t < trials; ++t) {
    const auto out = layer_forward(LayerSpec::dropout(0.5), kNoParams, in, true, &rng).output;
    for (std::size_t i = 0; i < 4; ++i) mean[i] += out[i] / trials;
  }
  for (std::size_t i = 0; i < 4; ++i) EXPECT_NEAR(mean[i], in[i], 0.02 * std::abs(in[i]));
}

TEST(Dropout, RateOutsideRangeIsRejected) {
  EXPECT_THROW(LayerSpec::dropout(1.0), InputError);
  EXPECT_THROW(LayerSpec::dropout(-0.1), InputError);
}

TEST(GradCheck, DenseFourToThree) {
  Rng rng(21);
  for (int t = 0; t < 20; ++t) {
    const auto r = fixtures::check_layer_gradients(LayerSpec::dense(3), {2, 4}, rng);
    EXPECT_LT(r.max_rel_error, 1e-4);
  }
}

TEST(GradCheck, ConvSixBySixTwoChannels) {
  Rng rng(22);
  for (int t = 0; t < 20; ++t) {
    const std::size_t stride = 1 + t % 2;
    const std::size_t pad = (t / 2) % 2;
    const auto r = fixtures::check_layer_gradients(LayerSpec::conv(2, stride, pad), {2, 6, 6, 2}, rng);
    EXPECT_LT(r.max_rel_error, 1e-4) << "stride " << stride << " pad " << pad;
  }
}

TEST(GradCheck, ParameterlessLayers) {
  Rng rng(23);
  const LayerSpec kinds[] = {LayerSpec::relu(), LayerSpec::maxpool(), LayerSpec::flatten(), LayerSpec::dropout(0.3),
                             LayerSpec::softmax()};
  for (const auto& layer : kinds) {
    for (int t = 0; t < 20; ++t) {
      const Shape shape = layer.kind == LayerKind::softmax || layer.kind == LayerKind::dropout
                              ? Shape{3, 5}
                              : Shape{2, 4, 6, 3};
      const auto r = fixtures::check_layer_gradients(layer, shape, rng);
      EXPECT_LT(r.max_rel_error, 1e-4) << kind_name(layer.kind);
    }
  }
}

TEST(GradCheck, SoftmaxCrossEntropyCombined) {
  Rng rng(24);
  for (int t = 0; t < 20; ++t) EXPECT_LT(fixtures::check_softmax_cross_entropy(4, 3, rng).max_rel_error, 1e-4);
}

TEST(GradCheck, WholeSmallNetwork) {
  // End to end through Network::backward, loss = cross-entropy.
  ModelSpec spec;
  spec.input_shape = {6, 6, 2};
  spec.layers = {LayerSpec::conv(3), LayerSpec::relu(), LayerSpec::maxpool(), LayerSpec::flatten(),
                 LayerSpec::dense(4), LayerSpec::relu(), LayerSpec::dense(3), LayerSpec::softmax()};
  Rng rng(25);
  Network<double> net(spec, init_params<double>(spec, rng));
  const auto batch = random_tensor({2, 6, 6, 2}, rng);
  const std::vector<int> labels{0, 2};
  std::vector<ForwardCache<double>> caches;
  Rng fr(1);
  const auto probs = net.forward_train(batch, fr, caches);
  const auto ce = cross_entropy(probs, labels);
  const auto grads = net.backward(caches, ce.grad_logits, spec.layers.size() - 1);
  const auto loss = [&] { return cross_entropy(net.predict(batch), labels).loss; };
  double worst = 0.0;
  for (std::size_t l = 0; l < spec.layers.size(); ++l) {
    auto& p = net.mutable_params().layers[l];
    for (auto* pair : {&p.weight, &p.bias}) {
      const auto& g = pair == &p.weight ? grads.layers[l].weight : grads.layers[l].bias;
      for (std::size_t i = 0; i < pair->size(); ++i) {
        const double saved = (*pair)[i];
        (*pair)[i] = saved + 1e-5;
        const double up = loss();
        (*pair)[i] = saved - 1e-5;
        const double down = loss();
        (*pair)[i] = saved;
        worst = std::max(worst, fixtures::relative_error(g[i], (up - down) / 2e-5));
      }
    }
  }
  EXPECT_LT(worst, 1e-4);
}

TEST(CrossEntropy, WorkedValues) {
  const std::vector<int> zero{0};
  EXPECT_DOUBLE_EQ(cross_entropy(Tensor<double>({1, 3}, std::vector<double>{1, 0, 0}), zero).loss, 0.0);
  EXPECT_NEAR(cross_entropy(Tensor<double>({1, 3}, std::vector<double>{0.5, 0.25, 0.25}), zero).loss, std::log(2.0),
              1e-12);
  for (int y = 0; y < 3; ++y) {
    const std::vector<int> label{y};
    EXPECT_NEAR(cross_entropy(Tensor<double>({1, 3}, 1.0 / 3.0), label).loss, std::log(3.0), 1e-12);
  }
}

TEST(CrossEntropy, ZeroProbabilityIsClamped) {
  const std::vector<int> label{1};
  const double loss = cross_entropy(Tensor<double>({1, 3}, std::vector<double>{1, 0, 0}), label).loss;
  EXPECT_NEAR(loss, -std::log(kProbabilityFloor), 1e-9);
}

TEST(CrossEntropy, UnnormalizedRowIsRejected) {
  const std::vector<int> label{0};
  EXPECT_THROW(cross_entropy(Tensor<double>({1, 3}, std::vector<double>{0.5, 0.5, 0.5}), label), InputError);
}

TEST(CrossEntropy, GradientIsProbsMinusOneHotOverBatch) {
  const Tensor<double> p({2, 3}, std::vector<double>{0.2, 0.3, 0.5, 0.6, 0.1, 0.3});
  const std::vector<int> labels{2, 0};
  const auto g = cross_entropy(p, labels).grad_logits;
  const std::vector<double> want{0.1, 0.15, -0.25, -0.2, 0.05, 0.15};
  for (std::size_t i = 0; i < 6; ++i) EXPECT_NEAR(g[i], want[i], 1e-15);
}

namespace {

ParamStore<double> scalar_store(double a, double b) {
  ParamStore<double> s;
  s.layers.push_back({Tensor<double>({2}, std::vector<double>{a, b}), Tensor<double>()});
  return s;
}

}  // namespace

TEST(Adam, ZeroGradientLeavesParameters) {
  auto theta = scalar_store(0.3, -0.7);
  auto state = AdamState<double>::for_params(theta);
  adam_step(state, theta, scalar_store(0.0, 0.0));
  EXPECT_EQ(theta.layers[0].weight.storage(), (std::vector<double>{0.3, -0.7}));
  EXPECT_EQ(state.t, 1u);
}

TEST(Adam, FirstStepsFromUnitGradient) {
  auto theta = scalar_store(0.0, 0.0);
  auto state = AdamState<double>::for_params(theta);
  adam_step(state, theta, scalar_store(1.0, 1.0));
  EXPECT_NEAR(theta.layers[0].weight[0], -0.001, 1e-10);
  adam_step(state, theta, scalar_store(1.0, 1.0));
  EXPECT_NEAR(theta.layers[0].weight[0], -0.002, 1e-10);
}

TEST(Adam, BiasCorrectedFirstMomentEqualsFirstGradient) {
  // With m_hat = g and v_hat = g^2 the first update is exactly
  // -alpha g / (sqrt(g^2) + eps).
  Rng rng(31);
  for (int t = 0; t < 100; ++t) {
    const double g = rng.uniform(-10.0, 10.0);
    auto theta = scalar_store(0.0, 0.0);
    auto state = AdamState<double>::for_params(theta);
    adam_step(state, theta, scalar_store(g, 0.0));
    EXPECT_EQ(theta.layers[0].weight[0], 0.0 - state.alpha * g / (std::sqrt(g * g) + state.epsilon));
    EXPECT_GE(state.v.layers[0].weight[0], 0.0);
  }
}

TEST(Augment, NeutralDrawIsIdentity) {
  Rng rng(41);
  Tensor<double> img({64, 64, 3});
  for (auto& v : img.values()) v = rng.uniform();
  EXPECT_EQ(apply_augmentation(img, AugmentDraw{0.0, 1.0, false}), img);
}

TEST(Augment, FlipTwiceIsOriginal) {
  Rng rng(42);
  Tensor<double> img({64, 64, 3});
  for (auto& v : img.values()) v = rng.uniform();
  EXPECT_EQ(flip_horizontal(flip_horizontal(img)), img);
  EXPECT_NE(flip_horizontal(img), img);
}

TEST(Augment, FixedSeedIsReproducibleAndInRange) {
  Tensor<float> img({64, 64, 3});
  Rng fill(43);
  for (auto& v : img.values()) v = static_cast<float>(fill.uniform());
  const AugmentConfig cfg;
  for (int t = 0; t < 10; ++t) {
    Rng a(100 + t), b(100 + t);
    const auto x = augment(img, cfg, a);
    EXPECT_EQ(x, augment(img, cfg, b));
    EXPECT_EQ(x.shape(), img.shape());
    for (float v : x.values()) {
      ASSERT_GE(v, 0.0f);
      ASSERT_LE(v, 1.0f);
    }
  }
}

TEST(Augment, DrawsStayInConfiguredRanges) {
  const AugmentConfig cfg;
  Rng rng(44);
  int flips = 0;
  for (int t = 0; t < 2000; ++t) {
    const auto d = draw_augmentation(cfg, rng);
    ASSERT_LE(std::abs(d.angle_deg), 40.0);
    ASSERT_GE(d.zoom, 0.9);
    ASSERT_LE(d.zoom, 1.1);
    flips += d.flip;
  }
  EXPECT_NEAR(flips, 1000, 120);
}

TEST(Augment, ConfigValidation) {
  AugmentConfig cfg;
  cfg.rotation_deg_max = 181.0;
  EXPECT_THROW(cfg.validate(), InputError);
  cfg = {};
  cfg.zoom_fraction = 1.0;
  EXPECT_THROW(cfg.validate(), InputError);
}

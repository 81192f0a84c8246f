#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <random>

#include "sista/arch/checkpoint.hpp"
#include "sista/arch/model.hpp"
#include "sista/error.hpp"
#include "sista/tensor/grad_check.hpp"
#include "sista/tensor/graph.hpp"
#include "sista/tensor/ops.hpp"

namespace sista::arch {
namespace {

namespace ops = tensor::ops;
using tensor::Graph;
using tensor::GraphScope;
using tensor::Shape;

template <typename T = double>
Tensor<T> random_tensor(Shape shape, std::uint64_t seed, double lo = -1.0,
                        double hi = 1.0) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(lo, hi);
  std::vector<T> v(tensor::numel_of(shape));
  for (T& x : v) x = static_cast<T>(u(rng));
  return Tensor<T>::from(std::move(shape), std::move(v));
}

struct Fixture {
  ParamStore<double> store;
  std::mt19937_64 rng{42};
  Builder<double> builder() { return Builder<double>(store, rng); }
};

BlockHyper small_hyper() {
  BlockHyper h;
  h.base_channels = 4;
  h.n_mamcnn = 1;
  h.window_size = 4;
  h.state_dim = 4;
  return h;
}

void expect_same(const Tensor<double>& a, const Tensor<double>& b) {
  ASSERT_EQ(a.shape(), b.shape());
  for (std::size_t i = 0; i < a.numel(); ++i) ASSERT_EQ(a.at(i), b.at(i)) << i;
}

void zero_named(ParamStore<double>& store, const std::string& prefix) {
  for (const auto& [name, t] : store.entries()) {
    if (name.rfind(prefix, 0) != 0) continue;
    const bool is_bias = name.ends_with(".bias") || name.ends_with(".beta");
    if (!is_bias) continue;
    Tensor<double> h = t;
    for (double& v : h.data()) v = 0.0;
  }
}

TEST(Vssb, ZeroOutputProjectionIsIdentity) {
  Fixture f;
  auto v = Vssb<double>::make(f.builder(), 4, 3);
  v.out_proj.zero();
  const auto x = random_tensor({1, 4, 5, 7}, 1);
  expect_same(v(x), x);
}

TEST(Vssb, ShapePreservedForOddSizes) {
  Fixture f;
  const auto v = Vssb<double>::make(f.builder(), 3, 2);
  for (auto [h, w] : {std::pair<std::size_t, std::size_t>{1, 1}, {3, 9}, {6, 2}}) {
    const auto y = v(random_tensor({2, 3, h, w}, h * 10 + w));
    EXPECT_EQ(y.shape(), (Shape{2, 3, h, w}));
  }
}

TEST(Vssb, ChannelMismatchThrows) {
  Fixture f;
  const auto v = Vssb<double>::make(f.builder(), 4, 2);
  EXPECT_THROW(v(random_tensor({1, 3, 4, 4}, 2)), Error);
}

TEST(Ss2d, MemorylessScanSumsFourCopies) {
  const std::size_t c = 2, h = 3, w = 5;
  const auto u = Tensor<double>::full({1, c, h, w}, 0.7);
  const auto delta = Tensor<double>::full({1, c, h, w}, 1.0);
  const auto ones = Tensor<double>::full({1, 1, h, w}, 1.0);
  std::array<Tensor<double>, 4> a, skip;
  for (auto& t : a) t = Tensor<double>::full({c, 1}, -1e4);
  for (auto& t : skip) t = Tensor<double>::zeros({c});
  const auto y = ss2d(u, delta, ones, ones, a, skip);
  ASSERT_EQ(y.shape(), (Shape{1, c, h, w}));
  for (std::size_t i = 0; i < y.numel(); ++i) EXPECT_NEAR(y.at(i), 4 * 0.7, 1e-12);
}

TEST(Ss2d, OrdersCoverEveryPixel) {
  const auto o = ss2d_orders(3, 4);
  EXPECT_EQ(o[0].front(), 0u);
  EXPECT_EQ(o[1].front(), 11u);
  EXPECT_EQ(o[2][1], 4u);
  EXPECT_EQ(o[3].front(), 11u);
  for (const auto& v : o) {
    std::vector<std::size_t> s = v;
    std::sort(s.begin(), s.end());
    for (std::size_t i = 0; i < s.size(); ++i) EXPECT_EQ(s[i], i);
  }
}

TEST(Wmb, IdentityBlocksRoundTripExactly) {
  Fixture f;
  auto m = Wmb<double>::make(f.builder(), 3, 4, 2, true);
  m.local1.out_proj.zero();
  m.local2.out_proj.zero();
  m.global.out_proj.zero();
  const auto x = random_tensor({1, 3, 6, 10}, 3);
  expect_same(m(x), x);
}

TEST(Wmb, PartitionCountsWindows) {
  const auto x = random_tensor({1, 3, 4, 4}, 4);
  const auto p = ops::window_partition(x, 2);
  EXPECT_EQ(p.shape(), (Shape{4, 3, 2, 2}));
  expect_same(ops::window_reverse(p, 1, 4, 4), x);
}

TEST(Wmb, GlobalScanReachesDistantPixels) {
  Fixture f;
  const auto m = Wmb<double>::make(f.builder(), 2, 2, 2, true);
  auto x = random_tensor({1, 2, 8, 8}, 5);
  x.set_requires_grad(true);
  Graph<double> g;
  {
    GraphScope<double> scope(g);
    const auto y = m(x);
    g.backward(ops::sum(ops::slice(ops::slice(ops::slice(y, 2, 7, 8), 3, 7, 8), 1, 0, 1)));
  }
  ASSERT_TRUE(x.has_grad());
  // Pixel (0, 0) lies in a different 2x2 window from (7, 7).
  EXPECT_NE(x.grad()[0], 0.0);
}

TEST(Res2Mmb, BranchShapesFollowStrides) {
  Fixture f;
  BlockHyper h = small_hyper();
  const auto r = Res2Mmb<double>::make(f.builder(), h, true);
  const auto x = random_tensor({1, 4, 32, 32}, 6);
  const auto br = r.branches(x);
  EXPECT_EQ(br.x1.shape(), (Shape{1, 4, 32, 32}));
  EXPECT_EQ(br.x2.shape(), (Shape{1, 4, 16, 16}));
  EXPECT_EQ(br.x3.shape(), (Shape{1, 4, 8, 8}));
  EXPECT_EQ(r(x).shape(), (Shape{1, 4, 32, 32}));
}

TEST(Res2Mmb, PoolVariantBranchShapes) {
  Fixture f;
  BlockHyper h = small_hyper();
  h.branch_pool = true;
  const auto r = Res2Mmb<double>::make(f.builder(), h, true);
  const auto br = r.branches(random_tensor({1, 4, 16, 16}, 7));
  EXPECT_EQ(br.x2.shape(), (Shape{1, 4, 8, 8}));
  EXPECT_EQ(br.x3.shape(), (Shape{1, 4, 4, 4}));
}

TEST(Res2Mmb, InjectionOrderMatters) {
  Fixture f;
  auto r = Res2Mmb<double>::make(f.builder(), small_hyper(), true);
  const auto x = random_tensor({1, 4, 8, 8}, 8);
  const auto a = r(x);
  r.order = Res2Order::kIndependent;
  const auto b = r(x);
  double diff = 0;
  for (std::size_t i = 0; i < a.numel(); ++i) diff = std::max(diff, std::abs(a.at(i) - b.at(i)));
  EXPECT_GT(diff, 1e-6);
}

TEST(Res2Mmb, OddSizeIsPaddedAndCropped) {
  Fixture f;
  const auto r = Res2Mmb<double>::make(f.builder(), small_hyper(), true);
  EXPECT_EQ(r(random_tensor({1, 4, 7, 9}, 9)).shape(), (Shape{1, 4, 7, 9}));
}

TEST(Res2Mmb, TooSmallThrows) {
  Fixture f;
  const auto r = Res2Mmb<double>::make(f.builder(), small_hyper(), true);
  EXPECT_THROW(r(random_tensor({1, 4, 3, 8}, 10)), Error);
}

TEST(MamCnn, ZeroBranchesPassInputThrough) {
  Fixture f;
  auto m = MamCnn<double>::make(f.builder(), small_hyper(), true);
  m.res2.fusion.zero();
  m.conv_b.zero();
  const auto x = random_tensor({1, 4, 8, 8}, 11);
  expect_same(m(x), x);
}

TEST(Res2MmNet, ShapeAndRange) {
  Fixture f;
  const auto net = Res2MmNet<double>::make(f.builder(), small_hyper(), true);
  const auto y = net(make_input_noise<double>(64, 64, 1));
  ASSERT_EQ(y.shape(), (Shape{1, 1, 64, 64}));
  for (double v : y.data()) {
    EXPECT_GT(v, 0.0);
    EXPECT_LT(v, 1.0);
  }
}

TEST(Res2MmNet, ZeroBlocksReduceToHead) {
  Fixture f;
  auto net = Res2MmNet<double>::make(f.builder(), small_hyper(), true);
  for (auto& b : net.blocks) {
    b.res2.fusion.zero();
    b.conv_b.zero();
  }
  const auto x = make_input_noise<double>(8, 8, 2);
  const auto head = net.head(x);
  const auto expected = ops::sigmoid(
      net.tail_b(ops::relu(net.tail_a(ops::add(head, head)))));
  expect_same(net(x), expected);
}

TEST(Encoder, LatentShape) {
  Fixture f;
  const BlockHyper h = small_hyper();
  const auto enc = SparsityEncoder<double>::make(f.builder(), h, true, true);
  EXPECT_EQ(enc(random_tensor({1, 1, 64, 64}, 12, 0, 1)).shape(),
            (Shape{1, h.latent_channels(), 32, 32}));
  EXPECT_EQ(enc(random_tensor({1, 1, 9, 7}, 13, 0, 1)).shape(),
            (Shape{1, h.latent_channels(), 5, 4}));
}

TEST(Encoder, ZeroInputZeroBiasesGivesZeroLatent) {
  Fixture f;
  const auto enc = SparsityEncoder<double>::make(f.builder().child("encoder"),
                                                 small_hyper(), true, true);
  zero_named(f.store, "encoder.");
  const auto z = enc(Tensor<double>::zeros({1, 1, 16, 16}));
  for (double v : z.data()) EXPECT_EQ(v, 0.0);
}

TEST(Decoder, ShapeRangeAndMirrorCount) {
  Fixture f;
  const BlockHyper h = small_hyper();
  SparsityEncoder<double>::make(f.builder().child("encoder"), h, true, true);
  const auto dec = SparsityDecoder<double>::make(f.builder().child("decoder"), h, true, true);
  const auto out = dec(random_tensor({1, h.latent_channels(), 32, 32}, 14, -5, 5), 64, 64);
  ASSERT_EQ(out.shape(), (Shape{1, 1, 64, 64}));
  for (double v : out.data()) {
    EXPECT_GT(v, 0.0);
    EXPECT_LT(v, 1.0);
  }
  const double ne = static_cast<double>(f.store.count("encoder."));
  const double nd = static_cast<double>(f.store.count("decoder."));
  EXPECT_LE(std::abs(ne - nd) / ne, 0.05);
}

TEST(ConvStack, MatchesWmbParameterCount) {
  for (auto [c, s] : {std::pair<std::size_t, std::size_t>{16, 8}, {128, 8}, {32, 4}}) {
    Fixture f;
    Wmb<double>::make(f.builder().child("wmb"), c, 8, s, true);
    const std::size_t wmb = f.store.count("wmb.");
    EXPECT_EQ(wmb, wmb_param_count(c, s));
    ConvStack<double>::make(f.builder().child("stack"), c, wmb);
    const double ratio = static_cast<double>(f.store.count("stack.")) / wmb;
    EXPECT_NEAR(ratio, 1.0, 0.10) << c;
  }
}

TEST(Threshold, LambdaAtInitAndLimits) {
  EXPECT_NEAR(threshold_lambda(0.1), 0.267240, 1e-6);
  EXPECT_NEAR(threshold_lambda(-1e6), 0.01, 1e-12);
  EXPECT_NEAR(threshold_lambda(1e6), 0.5, 1e-12);
  double prev = 0;
  for (double a = -20; a <= 20; a += 0.5) {
    const double l = threshold_lambda(a);
    EXPECT_GT(l, prev);
    EXPECT_GE(l, 0.01);
    EXPECT_LE(l, 0.5);
    prev = l;
  }
}

TEST(Threshold, BadBoundsThrow) {
  ThresholdBounds b;
  b.lambda_min = 0.6;
  EXPECT_THROW(b.validate(), Error);
  b = ThresholdBounds{};
  b.beta = 0;
  EXPECT_THROW(b.validate(), Error);
}

Tensor<double> alpha_for(double lambda) {
  const double s = (lambda - 0.01) / 0.49;
  return Tensor<double>::from({1}, {std::log(s / (1 - s))});
}

TEST(Threshold, SmoothSoftThresholdValues) {
  const auto alpha = alpha_for(0.25);
  const auto out = learnable_soft_threshold(
      Tensor<double>::from({3}, {1.0, 0.0, -1.0}), alpha, ThresholdBounds{});
  EXPECT_NEAR(out.at(0), 0.75000002, 1e-8);
  EXPECT_EQ(out.at(1), 0.0);
  EXPECT_NEAR(out.at(2), -0.75000002, 1e-8);
}

TEST(Threshold, GapToExactBoundedByLn2OverBeta) {
  const auto x = random_tensor({20000}, 15, -3, 3);
  const auto alpha = Tensor<double>::from({1}, {0.1});
  const auto out = learnable_soft_threshold(x, alpha, ThresholdBounds{});
  const double lam = threshold_lambda(0.1);
  for (std::size_t i = 0; i < x.numel(); ++i) {
    const double z = x.at(i);
    const double exact = (z > 0 ? 1 : -1) * std::max(std::abs(z) - lam, 0.0);
    ASSERT_LE(std::abs(out.at(i) - exact), std::log(2.0) / 20 + 1e-15);
  }
}

TEST(Threshold, AlphaGradientMatchesFiniteDifference) {
  const auto x = random_tensor({16}, 16, -1, 1);
  const double err = tensor::grad_check(
      [&](const Tensor<double>& a) {
        return ops::sum(learnable_soft_threshold(x, a, ThresholdBounds{}));
      },
      Tensor<double>::from({1}, {0.1}), 1e-6);
  EXPECT_LE(err, 1e-6);
}

SistaModel<double> toy_model(ModelVariant variant = {}, std::uint64_t seed = 3) {
  BlockHyper h;
  h.base_channels = 4;
  h.n_mamcnn = 1;
  h.window_size = 4;
  h.state_dim = 2;
  h.latent_multiplier = 2;
  h.res_depth = 1;
  return SistaModel<double>(h, variant, ThresholdBounds{}, seed);
}

TEST(Model, OutputsHaveDeclaredShapes) {
  const auto m = toy_model();
  const auto out = m.forward(make_input_noise<double>(8, 8, 4));
  EXPECT_EQ(out.fidelity.shape(), (Shape{1, 1, 8, 8}));
  EXPECT_EQ(out.latent.shape(), (Shape{1, 8, 4, 4}));
  EXPECT_EQ(out.sparse.shape(), out.latent.shape());
  EXPECT_EQ(out.proximal.shape(), (Shape{1, 1, 8, 8}));
  EXPECT_NEAR(out.lambda.item(), 0.267240, 1e-6);
}

TEST(Model, VariantsChangeParameterLayout) {
  EXPECT_TRUE(toy_model().has_alpha());
  ModelVariant a;
  a.proximal = false;
  const auto ma = toy_model(a);
  EXPECT_FALSE(ma.has_alpha());
  EXPECT_EQ(ma.params().count("encoder."), 0u);
  const auto out = ma.forward(make_input_noise<double>(8, 8, 4));
  expect_same(out.proximal, out.fidelity);

  ModelVariant c;
  c.res2mm_fidelity = false;
  const auto mc = toy_model(c);
  EXPECT_EQ(mc.params().count("fidelity."), 0u);
  EXPECT_GT(mc.params().count("fidelity_unet."), 0u);
}

TEST(Model, ForwardIsDeterministic) {
  const auto input = make_input_noise<double>(8, 8, 5);
  const auto a = toy_model().forward(input);
  const auto b = toy_model().forward(input);
  expect_same(a.proximal, b.proximal);
  expect_same(a.fidelity, b.fidelity);
  const auto c = toy_model({}, 4).forward(input);
  EXPECT_NE(a.proximal.at(0), c.proximal.at(0));
}

TEST(Model, InputNoiseIsUniformAndSeeded) {
  const auto a = make_input_noise<double>(16, 16, 9);
  const auto b = make_input_noise<double>(16, 16, 9);
  expect_same(a, b);
  for (double v : a.data()) {
    EXPECT_GE(v, 0.0);
    EXPECT_LT(v, 1.0);
  }
}

TEST(Model, PipelineGradientCheck) {
  auto m = toy_model();
  const auto w = random_tensor({1, 1, 8, 8}, 17);
  auto input = make_input_noise<double>(8, 8, 6);
  const auto loss = [&](const Tensor<double>& in) {
    const auto out = m.forward(in);
    return ops::add(ops::sum(ops::mul(out.proximal, w)),
                    ops::mean(ops::abs(out.sparse)));
  };
  EXPECT_LE(tensor::grad_check(loss, input, 1e-6), 1e-4);
  const double perr = tensor::param_grad_check(
      [&] { return loss(input); }, m.params().tensors(), 1e-6, 3);
  EXPECT_LE(perr, 1e-4);
}

std::filesystem::path temp_file(const std::string& name) {
  return std::filesystem::temp_directory_path() /
         (name + "_" + std::to_string(::testing::UnitTest::GetInstance()->random_seed()) + ".ssta");
}

TEST(Checkpoint, RoundTripRestoresParameters) {
  auto a = toy_model({}, 7);
  Checkpoint ck;
  ck.header_json = R"({"seed":7})";
  ck.blobs = params_to_blobs(a.params());
  const auto path = temp_file("ckpt");
  save_checkpoint(path, ck);
  const auto back = load_checkpoint(path);
  std::filesystem::remove(path);
  EXPECT_EQ(back.header_json, ck.header_json);
  ASSERT_EQ(back.blobs.size(), ck.blobs.size());

  auto b = toy_model({}, 8);
  load_params(b.params(), back);
  const auto& ea = a.params().entries();
  const auto& eb = b.params().entries();
  for (std::size_t i = 0; i < ea.size(); ++i)
    for (std::size_t j = 0; j < ea[i].second.numel(); ++j)
      ASSERT_EQ(static_cast<float>(ea[i].second.at(j)), eb[i].second.at(j));
}

TEST(Checkpoint, RejectsCorruptInput) {
  Checkpoint ck;
  ck.blobs.push_back({"w", {2}, {1.0f, 2.0f}});
  auto bytes = encode_checkpoint(ck);
  auto bad_magic = bytes;
  bad_magic[0] = 'X';
  EXPECT_THROW(decode_checkpoint(bad_magic), FormatError);
  auto truncated = bytes;
  truncated.pop_back();
  EXPECT_THROW(decode_checkpoint(truncated), FormatError);
  auto trailing = bytes;
  trailing.push_back(0);
  EXPECT_THROW(decode_checkpoint(trailing), FormatError);
  Checkpoint bad_json;
  bad_json.header_json = "{not json";
  EXPECT_THROW(encode_checkpoint(bad_json), Error);
  auto broken_header = bytes;
  broken_header[9] = 'x';  // first byte of "{}"
  EXPECT_THROW(decode_checkpoint(broken_header), FormatError);
}

TEST(Checkpoint, ShapeMismatchOnLoadThrows) {
  auto m = toy_model();
  Checkpoint ck;
  ck.blobs = params_to_blobs(m.params());
  ck.blobs[0].shape.push_back(1);
  ck.blobs[0].values.push_back(0);
  EXPECT_THROW(load_params(m.params(), ck), Error);
}

}  // namespace
}  // namespace sista::arch

#include "sista/arch/blocks.hpp"

#include <cmath>

#include "sista/error.hpp"
#include "sista/tensor/ops.hpp"

namespace sista::arch {

namespace ops = tensor::ops;

namespace {

std::size_t round_up(std::size_t v, std::size_t m) { return (v + m - 1) / m * m; }

template <typename T>
Tensor<T> crop(const Tensor<T>& x, std::size_t h, std::size_t w) {
  Tensor<T> out = x;
  if (out.dim(2) != h) out = ops::slice(out, 2, 0, h);
  if (out.dim(3) != w) out = ops::slice(out, 3, 0, w);
  return out;
}

template <typename T>
Tensor<T> pad_to_multiple(const Tensor<T>& x, std::size_t m) {
  const std::size_t h = x.dim(2), w = x.dim(3);
  const std::size_t hp = round_up(h, m), wp = round_up(w, m);
  if (hp == h && wp == w) return x;
  return ops::pad2d(x, hp - h, wp - w);
}

template <typename T>
void require_nchw(const Tensor<T>& x, std::size_t channels, const char* block) {
  if (!x.defined() || x.rank() != 4)
    throw_invalid(std::string(block) + ": expected an [N, C, H, W] input");
  if (x.dim(1) != channels)
    throw Error(ErrorCode::kShapeMismatch,
                std::string(block) + ": input has " + std::to_string(x.dim(1)) +
                    " channels, parameters expect " + std::to_string(channels));
}

// Inverse softplus, for initializing the delta bias.
double softplus_inverse(double y) { return y + std::log(-std::expm1(-y)); }

}  // namespace

void BlockHyper::validate() const {
  auto positive = [](std::size_t v, const char* name) {
    if (v < 1) throw_invalid(std::string("block hyperparameter ") + name + " must be >= 1");
  };
  positive(base_channels, "base_channels");
  positive(n_mamcnn, "n_mamcnn");
  positive(window_size, "window_size");
  positive(state_dim, "state_dim");
  positive(encoder_downscale, "encoder_downscale");
  positive(res_depth, "res_depth");
  positive(latent_multiplier, "latent_multiplier");
}

std::array<std::vector<std::size_t>, 4> ss2d_orders(std::size_t height, std::size_t width) {
  const std::size_t l = height * width;
  std::array<std::vector<std::size_t>, 4> o;
  for (auto& v : o) v.reserve(l);
  for (std::size_t p = 0; p < l; ++p) o[0].push_back(p);
  for (std::size_t p = l; p-- > 0;) o[1].push_back(p);
  for (std::size_t x = 0; x < width; ++x)
    for (std::size_t y = 0; y < height; ++y) o[2].push_back(y * width + x);
  o[3].assign(o[2].rbegin(), o[2].rend());
  return o;
}

template <typename T>
Tensor<T> ss2d(const Tensor<T>& u, const Tensor<T>& delta, const Tensor<T>& B,
               const Tensor<T>& C, const std::array<Tensor<T>, 4>& A,
               const std::array<Tensor<T>, 4>& skip) {
  if (u.rank() != 4) throw_invalid("ss2d: expected an [N, C, H, W] input");
  const std::size_t n = u.dim(0), c = u.dim(1), h = u.dim(2), w = u.dim(3);
  const std::size_t l = h * w;
  if (B.rank() != 4 || C.rank() != 4)
    throw_invalid("ss2d: B and C must be [N, S, H, W]");
  const std::size_t s = B.dim(1);
  const Tensor<T> us = ops::reshape(u, {n, c, l});
  const Tensor<T> ds = ops::reshape(delta, {n, c, l});
  const Tensor<T> bs = ops::reshape(B, {n, s, l});
  const Tensor<T> cs = ops::reshape(C, {n, s, l});
  const auto orders = ss2d_orders(h, w);
  Tensor<T> total;
  for (std::size_t k = 0; k < 4; ++k) {
    Tensor<T> y = ops::selective_scan(us, ds, A[k], bs, cs, skip[k], orders[k]);
    total = total.defined() ? ops::add(total, y) : y;
  }
  return ops::reshape(total, {n, c, h, w});
}

template <typename T>
Vssb<T> Vssb<T>::make(Builder<T> b, std::size_t channels, std::size_t state) {
  Vssb v;
  v.channels = channels;
  v.state = state;
  v.norm_gamma = b.constant("norm.gamma", {channels}, 1.0);
  v.norm_beta = b.constant("norm.beta", {channels}, 0.0);
  v.in_proj = Conv<T>::make(b.child("in_proj"), channels, 2 * channels, 1);
  v.dwconv = Conv<T>::make_depthwise(b.child("dwconv"), channels, 3);
  {
    Builder<T> dt = b.child("dt_proj");
    v.dt_proj.weight = dt.uniform("weight", {channels, channels, 1, 1}, channels);
    std::uniform_real_distribution<double> u(std::log(1e-3), std::log(1e-1));
    std::vector<T> bias(channels);
    for (T& x : bias) x = static_cast<T>(softplus_inverse(std::exp(u(b.rng()))));
    v.dt_proj.bias = dt.values("bias", {channels}, std::move(bias));
  }
  v.b_proj = Conv<T>::make(b.child("b_proj"), channels, state, 1, 1, false);
  v.c_proj = Conv<T>::make(b.child("c_proj"), channels, state, 1, 1, false);
  std::vector<T> a_init(channels * state);
  for (std::size_t ch = 0; ch < channels; ++ch)
    for (std::size_t s = 0; s < state; ++s)
      a_init[ch * state + s] = static_cast<T>(std::log(static_cast<double>(s + 1)));
  for (std::size_t k = 0; k < 4; ++k) {
    Builder<T> dir = b.child("dir" + std::to_string(k));
    v.a_log[k] = dir.values("a_log", {channels, state}, a_init);
    v.skip[k] = dir.constant("skip", {channels}, 1.0);
  }
  v.out_proj = Conv<T>::make(b.child("out_proj"), channels, channels, 1);
  return v;
}

template <typename T>
Tensor<T> Vssb<T>::operator()(const Tensor<T>& x) const {
  require_nchw(x, channels, "vssb");
  const Tensor<T> h = ops::group_norm(x, norm_gamma, norm_beta, 1);
  const Tensor<T> uz = in_proj(h);
  Tensor<T> u = ops::slice(uz, 1, 0, channels);
  const Tensor<T> z = ops::slice(uz, 1, channels, 2 * channels);
  u = ops::silu(dwconv(u));
  const Tensor<T> delta = ops::softplus(dt_proj(u), T(1));
  const Tensor<T> bm = b_proj(u);
  const Tensor<T> cm = c_proj(u);
  std::array<Tensor<T>, 4> a;
  for (std::size_t k = 0; k < 4; ++k) a[k] = ops::mul_scalar(ops::exp(a_log[k]), T(-1));
  Tensor<T> y = ss2d(u, delta, bm, cm, a, skip);
  y = ops::mul(y, ops::silu(z));
  return ops::add(x, out_proj(y));
}

template <typename T>
Wmb<T> Wmb<T>::make(Builder<T> b, std::size_t channels, std::size_t window,
                    std::size_t state, bool local_windows) {
  Wmb m;
  m.local1 = Vssb<T>::make(b.child("local1"), channels, state);
  m.local2 = Vssb<T>::make(b.child("local2"), channels, state);
  m.global = Vssb<T>::make(b.child("global"), channels, state);
  m.window = window;
  m.local_windows = local_windows;
  return m;
}

template <typename T>
Tensor<T> Wmb<T>::operator()(const Tensor<T>& x) const {
  require_nchw(x, local1.channels, "wmb");
  Tensor<T> t;
  if (local_windows) {
    const std::size_t n = x.dim(0), h = x.dim(2), w = x.dim(3);
    const Tensor<T> xp = pad_to_multiple(x, window);
    const std::size_t hp = xp.dim(2), wp = xp.dim(3);
    t = ops::window_reverse(local1(ops::window_partition(xp, window)), n, hp, wp);
    t = ops::window_reverse(local2(ops::window_partition(t, window)), n, hp, wp);
    t = crop(t, h, w);
  } else {
    t = local2(local1(x));
  }
  return global(t);
}

template <typename T>
Res2Mmb<T> Res2Mmb<T>::make(Builder<T> b, const BlockHyper& h, bool local_windows) {
  const std::size_t c = h.base_channels;
  Res2Mmb r;
  r.branch_pool = h.branch_pool;
  const std::size_t s2 = h.branch_pool ? 1 : 2, s4 = h.branch_pool ? 1 : 4;
  r.branch1 = Conv<T>::make(b.child("branch1"), c, c, 3);
  r.branch2 = Conv<T>::make(b.child("branch2"), c, c, 3, s2);
  r.branch4 = Conv<T>::make(b.child("branch4"), c, c, 3, s4);
  r.up32 = Conv<T>::make(b.child("up32"), c, c, 3);
  r.up21 = Conv<T>::make(b.child("up21"), c, c, 3);
  r.align1 = Conv<T>::make(b.child("align1"), c, c, 3);
  r.align2 = Conv<T>::make(b.child("align2"), c, c, 3);
  r.align3 = Conv<T>::make(b.child("align3"), c, c, 3);
  r.fusion = Conv<T>::make(b.child("fusion"), 3 * c, c, 1);
  r.wmb1 = Wmb<T>::make(b.child("wmb1"), c, h.window_size, h.state_dim, local_windows);
  r.wmb2 = Wmb<T>::make(b.child("wmb2"), c, h.window_size, h.state_dim, local_windows);
  r.wmb3 = Wmb<T>::make(b.child("wmb3"), c, h.window_size, h.state_dim, local_windows);
  return r;
}

template <typename T>
typename Res2Mmb<T>::Branches Res2Mmb<T>::branches(const Tensor<T>& x) const {
  require_nchw(x, branch1.in_channels(), "res2mmb");
  if (x.dim(2) < 4 || x.dim(3) < 4)
    throw_invalid("res2mmb: H and W must be >= 4 (quarter scale undefined), got " +
                  std::to_string(x.dim(2)) + "x" + std::to_string(x.dim(3)));
  const Tensor<T> xp = pad_to_multiple(x, 4);
  Branches br;
  br.x1 = branch1(xp);
  if (branch_pool) {
    br.x2 = ops::avg_pool(branch2(xp), 2);
    br.x3 = ops::avg_pool(branch4(xp), 4);
  } else {
    br.x2 = branch2(xp);
    br.x3 = branch4(xp);
  }
  return br;
}

template <typename T>
Tensor<T> Res2Mmb<T>::operator()(const Tensor<T>& x) const {
  const Branches br = branches(x);
  const Tensor<T> x3 = wmb3(br.x3);
  Tensor<T> x2, x1;
  if (order == Res2Order::kCoarseToFine) {
    x2 = wmb2(ops::add(br.x2, up32(ops::bilinear_upsample(x3, 2))));
    x1 = wmb1(ops::add(br.x1, up21(ops::bilinear_upsample(x2, 2))));
  } else {
    x2 = wmb2(br.x2);
    x1 = wmb1(br.x1);
  }
  const Tensor<T> r1 = align1(x1);
  const Tensor<T> r2 = align2(ops::bilinear_upsample(x2, 2));
  const Tensor<T> r3 = align3(ops::bilinear_upsample(x3, 4));
  const Tensor<T> out = fusion(ops::concat<T>({r1, r2, r3}, 1));
  return crop(out, x.dim(2), x.dim(3));
}

template <typename T>
MamCnn<T> MamCnn<T>::make(Builder<T> b, const BlockHyper& h, bool local_windows) {
  const std::size_t c = h.base_channels;
  MamCnn m;
  m.conv_in = Conv<T>::make(b.child("conv_in"), c, c, 3);
  m.res2 = Res2Mmb<T>::make(b.child("res2mmb"), h, local_windows);
  m.conv_a = Conv<T>::make(b.child("conv_a"), c, c, 3);
  m.conv_b = Conv<T>::make(b.child("conv_b"), c, c, 3);
  return m;
}

template <typename T>
Tensor<T> MamCnn<T>::operator()(const Tensor<T>& x) const {
  const Tensor<T> s = ops::add(x, res2(conv_in(x)));
  return ops::add(s, conv_b(ops::relu(conv_a(s))));
}

template <typename T>
ResBlock<T> ResBlock<T>::make(Builder<T> b, std::size_t channels) {
  return {Conv<T>::make(b.child("conv_a"), channels, channels, 3),
          Conv<T>::make(b.child("conv_b"), channels, channels, 3)};
}

template <typename T>
Tensor<T> ResBlock<T>::operator()(const Tensor<T>& x) const {
  return ops::add(x, conv_b(ops::relu(conv_a(x))));
}

template <typename T>
Res2MmNet<T> Res2MmNet<T>::make(Builder<T> b, const BlockHyper& h, bool local_windows) {
  const std::size_t c = h.base_channels;
  Res2MmNet net;
  net.head_a = Conv<T>::make(b.child("head_a"), 1, c, 3);
  net.head_b = Conv<T>::make(b.child("head_b"), c, c, 3);
  for (std::size_t i = 0; i < h.n_mamcnn; ++i)
    net.blocks.push_back(
        MamCnn<T>::make(b.child("mamcnn" + std::to_string(i)), h, local_windows));
  net.tail_a = Conv<T>::make(b.child("tail_a"), c, c, 3);
  net.tail_b = Conv<T>::make(b.child("tail_b"), c, 1, 3);
  return net;
}

template <typename T>
Tensor<T> Res2MmNet<T>::head(const Tensor<T>& x) const {
  require_nchw(x, 1, "res2mm_net");
  return head_b(ops::relu(head_a(x)));
}

template <typename T>
Tensor<T> Res2MmNet<T>::operator()(const Tensor<T>& x) const {
  const Tensor<T> f = head(x);
  Tensor<T> g = f;
  for (const auto& blk : blocks) g = blk(g);
  g = ops::add(f, g);
  return ops::sigmoid(tail_b(ops::relu(tail_a(g))));
}

template <typename T>
MiniUnet<T> MiniUnet<T>::make(Builder<T> b, std::size_t c) {
  MiniUnet u;
  u.enc1a = Conv<T>::make(b.child("enc1a"), 1, c, 3);
  u.enc1b = Conv<T>::make(b.child("enc1b"), c, c, 3);
  u.enc2a = Conv<T>::make(b.child("enc2a"), c, 2 * c, 3);
  u.enc2b = Conv<T>::make(b.child("enc2b"), 2 * c, 2 * c, 3);
  u.mid_a = Conv<T>::make(b.child("mid_a"), 2 * c, 2 * c, 3);
  u.mid_b = Conv<T>::make(b.child("mid_b"), 2 * c, 2 * c, 3);
  u.dec2a = Conv<T>::make(b.child("dec2a"), 4 * c, 2 * c, 3);
  u.dec2b = Conv<T>::make(b.child("dec2b"), 2 * c, 2 * c, 3);
  u.dec1a = Conv<T>::make(b.child("dec1a"), 3 * c, c, 3);
  u.dec1b = Conv<T>::make(b.child("dec1b"), c, c, 3);
  u.out = Conv<T>::make(b.child("out"), c, 1, 1);
  return u;
}

template <typename T>
Tensor<T> MiniUnet<T>::operator()(const Tensor<T>& x) const {
  require_nchw(x, 1, "mini_unet");
  auto pair = [](const Conv<T>& a, const Conv<T>& b, const Tensor<T>& t) {
    return ops::relu(b(ops::relu(a(t))));
  };
  const Tensor<T> xp = pad_to_multiple(x, 4);
  const Tensor<T> e1 = pair(enc1a, enc1b, xp);
  const Tensor<T> e2 = pair(enc2a, enc2b, ops::avg_pool(e1, 2));
  const Tensor<T> m = pair(mid_a, mid_b, ops::avg_pool(e2, 2));
  const Tensor<T> d2 = pair(dec2a, dec2b, ops::concat<T>({ops::bilinear_upsample(m, 2), e2}, 1));
  const Tensor<T> d1 = pair(dec1a, dec1b, ops::concat<T>({ops::bilinear_upsample(d2, 2), e1}, 1));
  return crop(ops::sigmoid(out(d1)), x.dim(2), x.dim(3));
}

std::size_t wmb_param_count(std::size_t c, std::size_t s) {
  const std::size_t vssb = 2 * c              // norm
                           + 2 * c * c + 2 * c  // in_proj
                           + 9 * c + c          // depthwise
                           + c * c + c          // dt_proj
                           + 2 * c * s          // B, C projections
                           + 4 * (c * s + c)    // per-direction A, skip
                           + c * c + c;         // out_proj
  return 3 * vssb;
}

template <typename T>
ConvStack<T> ConvStack<T>::make(Builder<T> b, std::size_t c, std::size_t target) {
  const std::size_t p3 = 9 * c * c + c, p1 = c * c + c;
  const std::size_t n3 = std::max<std::size_t>(1, target / (2 * p3));
  const std::size_t rest = target > n3 * p3 ? target - n3 * p3 : 0;
  const auto n1 = static_cast<std::size_t>(std::llround(static_cast<double>(rest) / p1));
  ConvStack s;
  std::size_t i = 0;
  for (std::size_t k = 0; k < n3; ++k, ++i)
    s.convs.push_back(Conv<T>::make(b.child("conv" + std::to_string(i)), c, c, 3));
  for (std::size_t k = 0; k < n1; ++k, ++i)
    s.convs.push_back(Conv<T>::make(b.child("conv" + std::to_string(i)), c, c, 1));
  return s;
}

template <typename T>
Tensor<T> ConvStack<T>::operator()(const Tensor<T>& x) const {
  Tensor<T> y = x;
  for (const auto& c : convs) y = ops::add(y, c(ops::relu(y)));
  return y;
}

template <typename T>
LatentMixer<T> LatentMixer<T>::make(Builder<T> b, const BlockHyper& h, bool use_wmb,
                                    bool local_windows) {
  LatentMixer m;
  m.use_wmb = use_wmb;
  const std::size_t c = h.latent_channels();
  if (use_wmb)
    m.wmb = Wmb<T>::make(b.child("wmb"), c, h.window_size, h.state_dim, local_windows);
  else
    m.stack = ConvStack<T>::make(b.child("convstack"), c, wmb_param_count(c, h.state_dim));
  return m;
}

template <typename T>
Tensor<T> LatentMixer<T>::operator()(const Tensor<T>& x) const {
  return use_wmb ? wmb(x) : stack(x);
}

template <typename T>
SparsityEncoder<T> SparsityEncoder<T>::make(Builder<T> b, const BlockHyper& h,
                                            bool use_wmb, bool local_windows) {
  const std::size_t c = h.latent_channels();
  SparsityEncoder e;
  e.downscale = h.encoder_downscale;
  e.trans_a = Conv<T>::make(b.child("trans_a"), 1, c, 3, h.encoder_downscale);
  e.trans_b = Conv<T>::make(b.child("trans_b"), c, c, 3);
  for (std::size_t i = 0; i < h.res_depth; ++i)
    e.res.push_back(ResBlock<T>::make(b.child("res" + std::to_string(i)), c));
  e.mixer = LatentMixer<T>::make(b, h, use_wmb, local_windows);
  return e;
}

template <typename T>
Tensor<T> SparsityEncoder<T>::operator()(const Tensor<T>& x) const {
  require_nchw(x, 1, "sparsity_encoder");
  Tensor<T> z = trans_b(ops::relu(trans_a(pad_to_multiple(x, downscale))));
  for (const auto& r : res) z = r(z);
  return mixer(z);
}

template <typename T>
SparsityDecoder<T> SparsityDecoder<T>::make(Builder<T> b, const BlockHyper& h,
                                            bool use_wmb, bool local_windows) {
  const std::size_t c = h.latent_channels();
  SparsityDecoder d;
  d.downscale = h.encoder_downscale;
  d.mixer = LatentMixer<T>::make(b, h, use_wmb, local_windows);
  for (std::size_t i = 0; i < h.res_depth; ++i)
    d.res.push_back(ResBlock<T>::make(b.child("res" + std::to_string(i)), c));
  d.trans = Conv<T>::make(b.child("trans"), c, c, 3);
  d.tail = Conv<T>::make(b.child("tail"), c, 1, 3);
  return d;
}

template <typename T>
Tensor<T> SparsityDecoder<T>::operator()(const Tensor<T>& z, std::size_t height,
                                         std::size_t width) const {
  require_nchw(z, trans.in_channels(), "sparsity_decoder");
  if (z.dim(2) * downscale < height || z.dim(3) * downscale < width)
    throw Error(ErrorCode::kShapeMismatch,
                "sparsity_decoder: latent " + std::to_string(z.dim(2)) + "x" +
                    std::to_string(z.dim(3)) + " cannot produce a " + std::to_string(height) +
                    "x" + std::to_string(width) + " image");
  Tensor<T> t = mixer(z);
  for (const auto& r : res) t = r(t);
  t = ops::relu(trans(ops::bilinear_upsample(t, downscale)));
  return crop(ops::sigmoid(tail(t)), height, width);
}

void ThresholdBounds::validate() const {
  if (!(lambda_min > 0) || !(lambda_max > lambda_min) || !(beta > 0))
    throw_invalid("threshold bounds need 0 < lambda_min < lambda_max and beta > 0");
}

double threshold_lambda(double alpha, const ThresholdBounds& bounds) {
  const double s = alpha >= 0 ? 1.0 / (1.0 + std::exp(-alpha))
                              : std::exp(alpha) / (1.0 + std::exp(alpha));
  return bounds.lambda_min + (bounds.lambda_max - bounds.lambda_min) * s;
}

template <typename T>
Tensor<T> threshold_lambda(const Tensor<T>& alpha, const ThresholdBounds& bounds) {
  return ops::add_scalar(
      ops::mul_scalar(ops::sigmoid(alpha), static_cast<T>(bounds.lambda_max - bounds.lambda_min)),
      static_cast<T>(bounds.lambda_min));
}

template <typename T>
Tensor<T> learnable_soft_threshold(const Tensor<T>& x, const Tensor<T>& alpha,
                                   const ThresholdBounds& bounds) {
  const Tensor<T> lambda = threshold_lambda(alpha, bounds);
  const Tensor<T> mag = ops::softplus(ops::sub(ops::abs(x), lambda), static_cast<T>(bounds.beta));
  return ops::mul(ops::sign(x), mag);
}

#define SISTA_INSTANTIATE(T)                                                       \
  template Tensor<T> ss2d(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&,    \
                          const Tensor<T>&, const std::array<Tensor<T>, 4>&,       \
                          const std::array<Tensor<T>, 4>&);                        \
  template struct Vssb<T>;                                                         \
  template struct Wmb<T>;                                                          \
  template struct Res2Mmb<T>;                                                      \
  template struct MamCnn<T>;                                                       \
  template struct ResBlock<T>;                                                     \
  template struct Res2MmNet<T>;                                                    \
  template struct MiniUnet<T>;                                                     \
  template struct ConvStack<T>;                                                    \
  template struct LatentMixer<T>;                                                  \
  template struct SparsityEncoder<T>;                                              \
  template struct SparsityDecoder<T>;                                              \
  template Tensor<T> threshold_lambda(const Tensor<T>&, const ThresholdBounds&);   \
  template Tensor<T> learnable_soft_threshold(const Tensor<T>&, const Tensor<T>&,  \
                                              const ThresholdBounds&);

SISTA_INSTANTIATE(float)
SISTA_INSTANTIATE(double)
#undef SISTA_INSTANTIATE

}  // namespace sista::arch

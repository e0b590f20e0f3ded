#include "davegan/layers.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace davegan {

ConvGeom conv2d_geometry(int in_h, int in_w, int kernel, int stride, Padding pad) {
  if (in_h < 1 || in_w < 1 || kernel < 1 || stride < 1)
    throw std::invalid_argument("conv2d_geometry: extents, kernel and stride must be positive");
  ConvGeom g{};
  if (pad == Padding::Same) {
    g.out_h = (in_h + stride - 1) / stride;
    g.out_w = (in_w + stride - 1) / stride;
    const int ph = std::max((g.out_h - 1) * stride + kernel - in_h, 0);
    const int pw = std::max((g.out_w - 1) * stride + kernel - in_w, 0);
    g.pad_top = ph / 2;   // odd padding pixel goes to the bottom
    g.pad_left = pw / 2;  // and to the right
  } else {
    if (in_h < kernel || in_w < kernel)
      throw std::invalid_argument("conv2d_geometry: Valid output extent below 1 for input " +
                                  std::to_string(in_h) + "x" + std::to_string(in_w) +
                                  " with kernel " + std::to_string(kernel));
    g.out_h = (in_h - kernel) / stride + 1;
    g.out_w = (in_w - kernel) / stride + 1;
    g.pad_top = 0;
    g.pad_left = 0;
  }
  return g;
}

std::pair<int, int> transp_conv2d_extents(int in_h, int in_w, int kernel, int stride,
                                          Padding pad) {
  if (in_h < 1 || in_w < 1 || kernel < 1 || stride < 1)
    throw std::invalid_argument("transp_conv2d_extents: extents, kernel and stride must be positive");
  if (pad == Padding::Same) return {in_h * stride, in_w * stride};
  return {(in_h - 1) * stride + kernel, (in_w - 1) * stride + kernel};
}

namespace {

// Geometry of the underlying strided conv. The same three kernels below power
// conv2d (forward = k_conv_fwd) and transp_conv2d (forward = k_conv_gin);
// each op's backward is assembled from the other two. All kernels accumulate
// into their destination, so they can write straight into adjoint buffers.
struct KGeom {
  int B, C, H, W;  // conv input
  int F, K;        // filters, square kernel
  int s, pt, pl;   // stride, top/left padding
  int OH, OW;      // conv output
};

inline int ow_lo(int j0, int s) { return j0 >= 0 ? 0 : (-j0 + s - 1) / s; }
inline int ow_hi(int j0, int s, int W, int OW) {
  if (j0 > W - 1) return -1;
  const int hi = (W - 1 - j0) / s;
  return hi < OW - 1 ? hi : OW - 1;
}

inline std::size_t row_off(int n0, int n1, int d1, int n2, int d2) {
  return (static_cast<std::size_t>(n0) * d1 + n1) * static_cast<std::size_t>(d2) + n2;
}

void k_conv_fwd(const KGeom& g, const real_t* x, const real_t* w, real_t* y) {
  for (int b = 0; b < g.B; ++b)
    for (int f = 0; f < g.F; ++f)
      for (int oh = 0; oh < g.OH; ++oh) {
        real_t* yrow = y + row_off(b * g.F + f, oh, g.OH, 0, g.OW);
        for (int c = 0; c < g.C; ++c)
          for (int ki = 0; ki < g.K; ++ki) {
            const int ih = oh * g.s - g.pt + ki;
            if (ih < 0 || ih >= g.H) continue;
            const real_t* xrow = x + row_off(b * g.C + c, ih, g.H, 0, g.W);
            const real_t* wrow = w + row_off(f * g.C + c, ki, g.K, 0, g.K);
            for (int kj = 0; kj < g.K; ++kj) {
              const int j0 = kj - g.pl;
              const real_t wv = wrow[kj];
              const int lo = ow_lo(j0, g.s), hi = ow_hi(j0, g.s, g.W, g.OW);
              for (int ow = lo; ow <= hi; ++ow) yrow[ow] += wv * xrow[ow * g.s + j0];
            }
          }
      }
}

void k_conv_gin(const KGeom& g, const real_t* gy, const real_t* w, real_t* gx) {
  for (int b = 0; b < g.B; ++b)
    for (int f = 0; f < g.F; ++f)
      for (int oh = 0; oh < g.OH; ++oh) {
        const real_t* gyrow = gy + row_off(b * g.F + f, oh, g.OH, 0, g.OW);
        for (int c = 0; c < g.C; ++c)
          for (int ki = 0; ki < g.K; ++ki) {
            const int ih = oh * g.s - g.pt + ki;
            if (ih < 0 || ih >= g.H) continue;
            real_t* gxrow = gx + row_off(b * g.C + c, ih, g.H, 0, g.W);
            const real_t* wrow = w + row_off(f * g.C + c, ki, g.K, 0, g.K);
            for (int kj = 0; kj < g.K; ++kj) {
              const int j0 = kj - g.pl;
              const real_t wv = wrow[kj];
              const int lo = ow_lo(j0, g.s), hi = ow_hi(j0, g.s, g.W, g.OW);
              for (int ow = lo; ow <= hi; ++ow) gxrow[ow * g.s + j0] += wv * gyrow[ow];
            }
          }
      }
}

void k_conv_gw(const KGeom& g, const real_t* x, const real_t* gy, real_t* gw) {
  for (int b = 0; b < g.B; ++b)
    for (int f = 0; f < g.F; ++f)
      for (int c = 0; c < g.C; ++c)
        for (int ki = 0; ki < g.K; ++ki)
          for (int kj = 0; kj < g.K; ++kj) {
            const int j0 = kj - g.pl;
            const int lo = ow_lo(j0, g.s), hi = ow_hi(j0, g.s, g.W, g.OW);
            real_t acc = 0;
            for (int oh = 0; oh < g.OH; ++oh) {
              const int ih = oh * g.s - g.pt + ki;
              if (ih < 0 || ih >= g.H) continue;
              const real_t* xrow = x + row_off(b * g.C + c, ih, g.H, 0, g.W);
              const real_t* gyrow = gy + row_off(b * g.F + f, oh, g.OH, 0, g.OW);
              for (int ow = lo; ow <= hi; ++ow) acc += gyrow[ow] * xrow[ow * g.s + j0];
            }
            gw[row_off(f * g.C + c, ki, g.K, kj, g.K)] += acc;
          }
}

void k_channel_sum(int B, int F, std::size_t hw, const real_t* d, real_t* out) {
  for (int b = 0; b < B; ++b)
    for (int f = 0; f < F; ++f) {
      const real_t* row = d + (static_cast<std::size_t>(b) * F + f) * hw;
      real_t acc = 0;
      for (std::size_t i = 0; i < hw; ++i) acc += row[i];
      out[f] += acc;
    }
}

void check_conv_args(const char* op, const Tensor& x, const Tensor& w, const Tensor& bias,
                     int stride, int ch_axis_of_w) {
  if (x.shape().rank() != 4)
    throw std::invalid_argument(std::string(op) + ": input must be [B, C, H, W], got " +
                                x.shape().str());
  if (w.shape().rank() != 4 || w.shape()[2] != w.shape()[3])
    throw std::invalid_argument(std::string(op) + ": weights must be rank 4 with a square kernel, got " +
                                w.shape().str());
  if (w.shape()[ch_axis_of_w] != x.shape()[1])
    throw std::invalid_argument(std::string(op) + ": weight channels " +
                                std::to_string(w.shape()[ch_axis_of_w]) +
                                " do not match input channels " + std::to_string(x.shape()[1]));
  const int f_axis = 1 - ch_axis_of_w;
  if (bias.shape().rank() != 1 || bias.shape()[0] != w.shape()[f_axis])
    throw std::invalid_argument(std::string(op) + ": bias must be [filters], got " +
                                bias.shape().str());
  if (stride < 1) throw std::invalid_argument(std::string(op) + ": stride must be >= 1");
}

Tape* conv_tape(const char* op, const Tensor& x, const Tensor& w, const Tensor& bias) {
  Tape* tape = nullptr;
  for (const Tensor* t : {&x, &w, &bias}) {
    if (!t->attached()) continue;
    if (tape && tape != t->tape())
      throw std::invalid_argument(std::string(op) + ": operands recorded on different tapes");
    tape = t->tape();
  }
  return tape;
}

}  // namespace

Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor& bias, int stride, Padding pad) {
  check_conv_args("conv2d", x, w, bias, stride, 1);
  const int B = x.shape()[0], C = x.shape()[1], H = x.shape()[2], W = x.shape()[3];
  const int F = w.shape()[0], K = w.shape()[2];
  const ConvGeom geo = conv2d_geometry(H, W, K, stride, pad);
  const KGeom g{B, C, H, W, F, K, stride, geo.pad_top, geo.pad_left, geo.out_h, geo.out_w};

  const std::size_t ohw = static_cast<std::size_t>(g.OH) * g.OW;
  std::vector<real_t> out(static_cast<std::size_t>(B) * F * ohw);
  {
    const real_t* pb = bias.data().data();
    for (int b = 0; b < B; ++b)
      for (int f = 0; f < F; ++f)
        std::fill_n(&out[(static_cast<std::size_t>(b) * F + f) * ohw], ohw, pb[f]);
  }
  k_conv_fwd(g, x.data().data(), w.data().data(), out.data());

  Shape out_shape{B, F, g.OH, g.OW};
  Tape* tape = conv_tape("conv2d", x, w, bias);
  if (!tape) return Tensor(std::move(out_shape), std::move(out));

  auto sx = x.data_ptr();
  auto sw = w.data_ptr();
  const int xn = x.attached() ? x.node() : -1;
  const int wn = w.attached() ? w.node() : -1;
  const int bn = bias.attached() ? bias.node() : -1;
  const std::size_t nx = x.numel(), nw = w.numel(), nb = bias.numel();
  auto back = [=](Tape& t, const std::vector<real_t>& gy) {
    if (real_t* gx = t.adjoint_ptr(xn, nx)) k_conv_gin(g, gy.data(), sw->data(), gx);
    if (real_t* gw = t.adjoint_ptr(wn, nw)) k_conv_gw(g, sx->data(), gy.data(), gw);
    if (real_t* gb = t.adjoint_ptr(bn, nb))
      k_channel_sum(g.B, g.F, static_cast<std::size_t>(g.OH) * g.OW, gy.data(), gb);
  };
  return tape->emit(std::move(out_shape), std::move(out), std::move(back));
}

Tensor transp_conv2d(const Tensor& x, const Tensor& w, const Tensor& bias, int stride,
                     Padding pad) {
  check_conv_args("transp_conv2d", x, w, bias, stride, 0);
  const int B = x.shape()[0], C = x.shape()[1], H = x.shape()[2], W = x.shape()[3];
  const int F = w.shape()[1], K = w.shape()[2];
  auto [YH, YW] = transp_conv2d_extents(H, W, K, stride, pad);
  // virtual conv runs [B, F, YH, YW] -> [B, C, H, W]; our forward is its
  // input-gradient seeded with x
  const ConvGeom geo = conv2d_geometry(YH, YW, K, stride, pad);
  if (geo.out_h != H || geo.out_w != W)
    throw std::logic_error("transp_conv2d: geometry mismatch");
  const KGeom g{B, F, YH, YW, C, K, stride, geo.pad_top, geo.pad_left, H, W};

  const std::size_t yhw = static_cast<std::size_t>(YH) * YW;
  std::vector<real_t> out(static_cast<std::size_t>(B) * F * yhw);
  {
    const real_t* pb = bias.data().data();
    for (int b = 0; b < B; ++b)
      for (int f = 0; f < F; ++f)
        std::fill_n(&out[(static_cast<std::size_t>(b) * F + f) * yhw], yhw, pb[f]);
  }
  k_conv_gin(g, x.data().data(), w.data().data(), out.data());

  Shape out_shape{B, F, YH, YW};
  Tape* tape = conv_tape("transp_conv2d", x, w, bias);
  if (!tape) return Tensor(std::move(out_shape), std::move(out));

  auto sx = x.data_ptr();
  auto sw = w.data_ptr();
  const int xn = x.attached() ? x.node() : -1;
  const int wn = w.attached() ? w.node() : -1;
  const int bn = bias.attached() ? bias.node() : -1;
  const std::size_t nx = x.numel(), nw = w.numel(), nb = bias.numel();
  auto back = [=](Tape& t, const std::vector<real_t>& gy) {
    if (real_t* gx = t.adjoint_ptr(xn, nx)) k_conv_fwd(g, gy.data(), sw->data(), gx);
    if (real_t* gw = t.adjoint_ptr(wn, nw)) k_conv_gw(g, gy.data(), sx->data(), gw);
    if (real_t* gb = t.adjoint_ptr(bn, nb))
      k_channel_sum(B, F, static_cast<std::size_t>(YH) * YW, gy.data(), gb);
  };
  return tape->emit(std::move(out_shape), std::move(out), std::move(back));
}

Tensor batchnorm(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                 BatchNormState& state, bool training) {
  if (x.shape().rank() != 4)
    throw std::invalid_argument("batchnorm: input must be [B, C, H, W], got " + x.shape().str());
  const int B = x.shape()[0], C = x.shape()[1];
  const std::size_t hw = static_cast<std::size_t>(x.shape()[2]) * x.shape()[3];
  auto check_param = [&](const Tensor& p, const char* nm) {
    if (p.shape().rank() != 1 || p.shape()[0] != C)
      throw std::invalid_argument(std::string("batchnorm: ") + nm + " must be [" +
                                  std::to_string(C) + "], got " + p.shape().str());
  };
  check_param(gamma, "gamma");
  check_param(beta, "beta");
  if (state.running_mean.size() != static_cast<std::size_t>(C))
    throw std::invalid_argument("batchnorm: state holds " +
                                std::to_string(state.running_mean.size()) +
                                " channels, input has " + std::to_string(C));
  if (training && B < 2)
    throw std::invalid_argument("batchnorm: training requires batch >= 2, got " +
                                std::to_string(B));

  const real_t* px = x.data().data();
  const real_t* pg = gamma.data().data();
  const real_t* pbeta = beta.data().data();
  const std::size_t n_per_c = static_cast<std::size_t>(B) * hw;

  // per-channel mean and 1/sqrt(var + eps) actually used for normalization
  std::vector<real_t> mean(static_cast<std::size_t>(C)), inv_std(static_cast<std::size_t>(C));
  if (training) {
    for (int c = 0; c < C; ++c) {
      real_t m = 0;
      for (int b = 0; b < B; ++b) {
        const real_t* row = px + (static_cast<std::size_t>(b) * C + c) * hw;
        for (std::size_t i = 0; i < hw; ++i) m += row[i];
      }
      m /= static_cast<real_t>(n_per_c);
      real_t v = 0;
      for (int b = 0; b < B; ++b) {
        const real_t* row = px + (static_cast<std::size_t>(b) * C + c) * hw;
        for (std::size_t i = 0; i < hw; ++i) {
          const real_t d = row[i] - m;
          v += d * d;
        }
      }
      v /= static_cast<real_t>(n_per_c);  // biased
      mean[static_cast<std::size_t>(c)] = m;
      inv_std[static_cast<std::size_t>(c)] = real_t{1} / std::sqrt(v + state.eps);
      state.running_mean[static_cast<std::size_t>(c)] =
          state.momentum * state.running_mean[static_cast<std::size_t>(c)] +
          (real_t{1} - state.momentum) * m;
      state.running_var[static_cast<std::size_t>(c)] =
          state.momentum * state.running_var[static_cast<std::size_t>(c)] +
          (real_t{1} - state.momentum) * v;
    }
  } else {
    for (int c = 0; c < C; ++c) {
      mean[static_cast<std::size_t>(c)] = state.running_mean[static_cast<std::size_t>(c)];
      inv_std[static_cast<std::size_t>(c)] =
          real_t{1} / std::sqrt(state.running_var[static_cast<std::size_t>(c)] + state.eps);
    }
  }

  std::vector<real_t> out(x.numel());
  for (int b = 0; b < B; ++b)
    for (int c = 0; c < C; ++c) {
      const std::size_t base = (static_cast<std::size_t>(b) * C + c) * hw;
      const real_t m = mean[static_cast<std::size_t>(c)];
      const real_t is = inv_std[static_cast<std::size_t>(c)];
      const real_t gc = pg[c], bc = pbeta[c];
      for (std::size_t i = 0; i < hw; ++i) out[base + i] = gc * (px[base + i] - m) * is + bc;
    }

  Tape* tape = conv_tape("batchnorm", x, gamma, beta);
  if (!tape) return Tensor(x.shape(), std::move(out));

  auto sx = x.data_ptr();
  auto sg = gamma.data_ptr();
  const int xn = x.attached() ? x.node() : -1;
  const int gn = gamma.attached() ? gamma.node() : -1;
  const int btn = beta.attached() ? beta.node() : -1;
  const std::size_t nx = x.numel();
  auto back = [=, mean = std::move(mean), inv_std = std::move(inv_std)](
                  Tape& t, const std::vector<real_t>& g) {
    const real_t* qx = sx->data();
    const real_t* qg = sg->data();
    real_t* gx = t.adjoint_ptr(xn, nx);
    real_t* gga = t.adjoint_ptr(gn, static_cast<std::size_t>(C));
    real_t* gbe = t.adjoint_ptr(btn, static_cast<std::size_t>(C));
    for (int c = 0; c < C; ++c) {
      const real_t m = mean[static_cast<std::size_t>(c)];
      const real_t is = inv_std[static_cast<std::size_t>(c)];
      real_t sum_g = 0, sum_gx = 0;  // sums of g and g * xhat over the channel
      for (int b = 0; b < B; ++b) {
        const std::size_t base = (static_cast<std::size_t>(b) * C + c) * hw;
        for (std::size_t i = 0; i < hw; ++i) {
          sum_g += g[base + i];
          sum_gx += g[base + i] * (qx[base + i] - m) * is;
        }
      }
      if (gga) gga[c] += sum_gx;
      if (gbe) gbe[c] += sum_g;
      if (gx) {
        const real_t gc = qg[c];
        if (training) {
          const real_t inv_n = real_t{1} / static_cast<real_t>(n_per_c);
          for (int b = 0; b < B; ++b) {
            const std::size_t base = (static_cast<std::size_t>(b) * C + c) * hw;
            for (std::size_t i = 0; i < hw; ++i) {
              const real_t xh = (qx[base + i] - m) * is;
              gx[base + i] += gc * is * (g[base + i] - sum_g * inv_n - xh * sum_gx * inv_n);
            }
          }
        } else {
          for (int b = 0; b < B; ++b) {
            const std::size_t base = (static_cast<std::size_t>(b) * C + c) * hw;
            for (std::size_t i = 0; i < hw; ++i) gx[base + i] += g[base + i] * gc * is;
          }
        }
      }
    }
  };
  return tape->emit(x.shape(), std::move(out), std::move(back));
}

Tensor leaky_relu(const Tensor& x, real_t slope) {
  if (x.numel() == 0) throw std::invalid_argument("leaky_relu: empty tensor");
  const std::size_t n = x.numel();
  const real_t* px = x.data().data();
  std::vector<real_t> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = px[i] > 0 ? px[i] : slope * px[i];
  if (!x.attached()) return Tensor(x.shape(), std::move(out));
  Tape* tape = x.tape();
  auto sx = x.data_ptr();
  const int xn = x.node();
  auto back = [=](Tape& t, const std::vector<real_t>& g) {
    if (real_t* gx = t.adjoint_ptr(xn, n)) {
      const real_t* qx = sx->data();
      for (std::size_t i = 0; i < n; ++i) gx[i] += g[i] * (qx[i] > 0 ? real_t{1} : slope);
    }
  };
  return tape->emit(x.shape(), std::move(out), std::move(back));
}

Tensor sigmoid(const Tensor& x) {
  if (x.numel() == 0) throw std::invalid_argument("sigmoid: empty tensor");
  constexpr real_t kFloor = 1e-15;
  constexpr real_t kCeil = real_t{1} - 1e-15;
  const std::size_t n = x.numel();
  const real_t* px = x.data().data();
  std::vector<real_t> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    real_t s;
    if (px[i] >= 0) {
      const real_t e = std::exp(-px[i]);
      s = real_t{1} / (real_t{1} + e);
    } else {
      const real_t e = std::exp(px[i]);
      s = e / (real_t{1} + e);
    }
    out[i] = s < kFloor ? kFloor : (s > kCeil ? kCeil : s);
  }
  if (!x.attached()) return Tensor(x.shape(), std::move(out));
  Tape* tape = x.tape();
  auto so = std::make_shared<const std::vector<real_t>>(std::move(out));
  const int xn = x.node();
  auto back = [=](Tape& t, const std::vector<real_t>& g) {
    if (real_t* gx = t.adjoint_ptr(xn, n)) {
      const real_t* qo = so->data();
      for (std::size_t i = 0; i < n; ++i) gx[i] += g[i] * qo[i] * (real_t{1} - qo[i]);
    }
  };
  return tape->emit(x.shape(), std::vector<real_t>(*so), std::move(back));
}

AdamOptimizer::AdamOptimizer(std::vector<Variable*> params, AdamConfig cfg)
    : params_(std::move(params)), cfg_(cfg) {
  for (Variable* p : params_)
    if (!p) throw std::invalid_argument("adam: null parameter");
  m_.reserve(params_.size());
  v_.reserve(params_.size());
  for (Variable* p : params_) {
    m_.emplace_back(p->numel(), 0);
    v_.emplace_back(p->numel(), 0);
  }
}

void AdamOptimizer::step() {
  ++t_;
  const real_t bc1 = real_t{1} - std::pow(cfg_.beta1, static_cast<real_t>(t_));
  const real_t bc2 = real_t{1} - std::pow(cfg_.beta2, static_cast<real_t>(t_));
  for (std::size_t pi = 0; pi < params_.size(); ++pi) {
    Variable& p = *params_[pi];
    const std::vector<real_t>& g = p.grad();
    std::vector<real_t>& val = p.value();
    std::vector<real_t>& m = m_[pi];
    std::vector<real_t>& v = v_[pi];
    for (std::size_t i = 0; i < g.size(); ++i) {
      if (!std::isfinite(g[i]))
        throw std::runtime_error("adam: non-finite gradient in parameter " + p.name() +
                                 " at index " + std::to_string(i));
      m[i] = cfg_.beta1 * m[i] + (real_t{1} - cfg_.beta1) * g[i];
      v[i] = cfg_.beta2 * v[i] + (real_t{1} - cfg_.beta2) * g[i] * g[i];
      val[i] -= cfg_.alpha * (m[i] / bc1) / (std::sqrt(v[i] / bc2) + cfg_.eps);
    }
  }
}

void AdamOptimizer::zero_grad() {
  for (Variable* p : params_) p->zero_grad();
}

std::vector<real_t> gaussian_init(Rng& rng, std::size_t n, real_t stddev) {
  std::vector<real_t> v(n);
  for (auto& x : v) x = static_cast<real_t>(rng.normal(0.0, static_cast<double>(stddev)));
  return v;
}

}  // namespace davegan

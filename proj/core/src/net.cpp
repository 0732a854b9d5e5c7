#include "flowfuse/net.hpp"

#include <Eigen/Core>

#include <cmath>

namespace flowfuse {

namespace {

using RowMat = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMat = Eigen::Map<RowMat>;
using ConstMapMat = Eigen::Map<const RowMat>;

int conv_out_dim(int in, int k, int s, int p) { return (in + 2 * p - k) / s + 1; }

// Column matrix layout: rows = in_c*k*k, cols = oh*ow, row-major.
void im2col(const Tensor& x, int ni, int k, int s, int p, int oh, int ow,
            std::vector<float>& col) {
  const int ic = x.c, h = x.h, w = x.w;
  col.assign(static_cast<std::size_t>(ic) * k * k * oh * ow, 0.f);
  std::size_t r = 0;
  for (int c = 0; c < ic; ++c) {
    for (int ky = 0; ky < k; ++ky) {
      for (int kx = 0; kx < k; ++kx, ++r) {
        float* dst = col.data() + r * static_cast<std::size_t>(oh) * ow;
        for (int oy = 0; oy < oh; ++oy) {
          const int iy = oy * s - p + ky;
          if (iy < 0 || iy >= h) { dst += ow; continue; }
          const float* src = &x.at(ni, c, iy, 0);
          for (int ox = 0; ox < ow; ++ox, ++dst) {
            const int ix = ox * s - p + kx;
            if (ix >= 0 && ix < w) *dst = src[ix];
          }
        }
      }
    }
  }
}

void col2im_accumulate(const std::vector<float>& col, int ni, int k, int s, int p,
                       int oh, int ow, Tensor& d_in) {
  const int ic = d_in.c, h = d_in.h, w = d_in.w;
  std::size_t r = 0;
  for (int c = 0; c < ic; ++c) {
    for (int ky = 0; ky < k; ++ky) {
      for (int kx = 0; kx < k; ++kx, ++r) {
        const float* src = col.data() + r * static_cast<std::size_t>(oh) * ow;
        for (int oy = 0; oy < oh; ++oy) {
          const int iy = oy * s - p + ky;
          if (iy < 0 || iy >= h) { src += ow; continue; }
          float* dst = &d_in.at(ni, c, iy, 0);
          for (int ox = 0; ox < ow; ++ox, ++src) {
            const int ix = ox * s - p + kx;
            if (ix >= 0 && ix < w) dst[ix] += *src;
          }
        }
      }
    }
  }
}

}  // namespace

void ConvLayer::init(int in, int out, int k, int s, int p, Rng& rng) {
  in_c = in;
  out_c = out;
  kernel = k;
  stride = s;
  pad = p;
  weights.resize(static_cast<std::size_t>(out) * in * k * k);
  bias.assign(static_cast<std::size_t>(out), 0.f);
  const double fan_in = static_cast<double>(in) * k * k;
  const double stddev = std::sqrt(2.0 / fan_in);
  for (float& wv : weights) wv = static_cast<float>(rng.normal(0.0, stddev));
}

Tensor conv_forward(const ConvLayer& layer, const Tensor& x) {
  if (x.c != layer.in_c) throw ShapeError("conv_forward: channel mismatch");
  const int k = layer.kernel, s = layer.stride, p = layer.pad;
  const int oh = conv_out_dim(x.h, k, s, p);
  const int ow = conv_out_dim(x.w, k, s, p);
  Tensor out(x.n, layer.out_c, oh, ow);

  const Eigen::Index kk = static_cast<Eigen::Index>(layer.in_c) * k * k;
  const Eigen::Index cols = static_cast<Eigen::Index>(oh) * ow;
  ConstMapMat wmat(layer.weights.data(), layer.out_c, kk);
  std::vector<float> col;
  for (int ni = 0; ni < x.n; ++ni) {
    im2col(x, ni, k, s, p, oh, ow, col);
    ConstMapMat cmat(col.data(), kk, cols);
    MapMat omat(&out.at(ni, 0, 0, 0), layer.out_c, cols);
    omat.noalias() = wmat * cmat;
    for (int oc = 0; oc < layer.out_c; ++oc)
      omat.row(oc).array() += layer.bias[static_cast<std::size_t>(oc)];
  }
  return out;
}

void conv_backward(const ConvLayer& layer, const Tensor& x, const Tensor& d_out,
                   Tensor& d_in, std::vector<float>& d_w, std::vector<float>& d_b) {
  const int k = layer.kernel, s = layer.stride, p = layer.pad;
  const int oh = d_out.h, ow = d_out.w;
  d_in = Tensor(x.n, x.c, x.h, x.w);

  const Eigen::Index kk = static_cast<Eigen::Index>(layer.in_c) * k * k;
  const Eigen::Index cols = static_cast<Eigen::Index>(oh) * ow;
  ConstMapMat wmat(layer.weights.data(), layer.out_c, kk);
  MapMat dwmat(d_w.data(), layer.out_c, kk);

  std::vector<float> col(static_cast<std::size_t>(kk) * cols);
  std::vector<float> dcol(static_cast<std::size_t>(kk) * cols);
  for (int ni = 0; ni < x.n; ++ni) {
    im2col(x, ni, k, s, p, oh, ow, col);
    ConstMapMat cmat(col.data(), kk, cols);
    ConstMapMat domat(&d_out.at(ni, 0, 0, 0), layer.out_c, cols);
    dwmat.noalias() += domat * cmat.transpose();
    // plain loop: Eigen's vectorized sum() orders additions by buffer
    // alignment, which is not stable across allocations
    for (int oc = 0; oc < layer.out_c; ++oc) {
      const float* row = &d_out.at(ni, oc, 0, 0);
      float acc = 0.f;
      for (Eigen::Index i = 0; i < cols; ++i) acc += row[i];
      d_b[static_cast<std::size_t>(oc)] += acc;
    }
    MapMat dcmat(dcol.data(), kk, cols);
    dcmat.noalias() = wmat.transpose() * domat;
    col2im_accumulate(dcol, ni, k, s, p, oh, ow, d_in);
  }
}

void leaky_relu_inplace(Tensor& t, float slope) {
  for (float& v : t.data)
    if (v < 0.f) v *= slope;
}

void leaky_relu_backward_inplace(const Tensor& activated, Tensor& grad, float slope) {
  for (std::size_t i = 0; i < grad.data.size(); ++i)
    if (activated.data[i] <= 0.f) grad.data[i] *= slope;
}

Tensor upsample2x_nearest(const Tensor& x) {
  Tensor out(x.n, x.c, x.h * 2, x.w * 2);
  for (int ni = 0; ni < x.n; ++ni)
    for (int c = 0; c < x.c; ++c)
      for (int y = 0; y < out.h; ++y) {
        const float* src = &x.at(ni, c, y / 2, 0);
        float* dst = &out.at(ni, c, y, 0);
        for (int xpos = 0; xpos < out.w; ++xpos) dst[xpos] = src[xpos / 2];
      }
  return out;
}

Tensor upsample2x_backward(const Tensor& d_out) {
  Tensor d_in(d_out.n, d_out.c, d_out.h / 2, d_out.w / 2);
  for (int ni = 0; ni < d_out.n; ++ni)
    for (int c = 0; c < d_out.c; ++c)
      for (int y = 0; y < d_out.h; ++y) {
        const float* src = &d_out.at(ni, c, y, 0);
        float* dst = &d_in.at(ni, c, y / 2, 0);
        for (int xpos = 0; xpos < d_out.w; ++xpos) dst[xpos / 2] += src[xpos];
      }
  return d_in;
}

Tensor concat_channels(const Tensor& a, const Tensor& b) {
  if (a.n != b.n || a.h != b.h || a.w != b.w)
    throw ShapeError("concat_channels: spatial/batch mismatch");
  Tensor out(a.n, a.c + b.c, a.h, a.w);
  const std::size_t plane = static_cast<std::size_t>(a.h) * a.w;
  for (int ni = 0; ni < a.n; ++ni) {
    std::copy_n(&a.at(ni, 0, 0, 0), static_cast<std::size_t>(a.c) * plane,
                &out.at(ni, 0, 0, 0));
    std::copy_n(&b.at(ni, 0, 0, 0), static_cast<std::size_t>(b.c) * plane,
                &out.at(ni, a.c, 0, 0));
  }
  return out;
}

void split_channels(const Tensor& d_cat, int c_a, Tensor& d_a, Tensor& d_b) {
  d_a = Tensor(d_cat.n, c_a, d_cat.h, d_cat.w);
  d_b = Tensor(d_cat.n, d_cat.c - c_a, d_cat.h, d_cat.w);
  const std::size_t plane = static_cast<std::size_t>(d_cat.h) * d_cat.w;
  for (int ni = 0; ni < d_cat.n; ++ni) {
    std::copy_n(&d_cat.at(ni, 0, 0, 0), static_cast<std::size_t>(c_a) * plane,
                &d_a.at(ni, 0, 0, 0));
    std::copy_n(&d_cat.at(ni, c_a, 0, 0), static_cast<std::size_t>(d_b.c) * plane,
                &d_b.at(ni, 0, 0, 0));
  }
}

void UNet::init(const UNetConfig& config, std::uint64_t seed) {
  cfg = config;
  init_seed = seed;
  Rng rng(seed);
  encoder.clear();
  decoder.clear();
  int in_c = cfg.in_c;
  for (int i = 0; i < cfg.levels; ++i) {
    const int out_c = cfg.base_channels << i;
    ConvLayer l;
    l.init(in_c, out_c, 3, 2, 1, rng);
    encoder.push_back(std::move(l));
    in_c = out_c;
  }
  // Decoder block k upsamples to resolution H/2^(levels-1-k); skip is the
  // encoder output at that resolution, or the raw input at full resolution.
  int cur_c = cfg.base_channels << (cfg.levels - 1);
  for (int k = 0; k < cfg.levels; ++k) {
    const int skip_c =
        (k < cfg.levels - 1) ? (cfg.base_channels << (cfg.levels - 2 - k)) : cfg.in_c;
    const int out_c =
        (k < cfg.levels - 1) ? (cfg.base_channels << (cfg.levels - 2 - k)) : cfg.base_channels;
    ConvLayer l;
    l.init(cur_c + skip_c, out_c, 3, 1, 1, rng);
    decoder.push_back(std::move(l));
    cur_c = out_c;
  }
  head.init(cur_c, cfg.out_c, 1, 1, 0, rng);
}

std::size_t UNet::param_count() const {
  std::size_t n = head.param_count();
  for (const auto& l : encoder) n += l.param_count();
  for (const auto& l : decoder) n += l.param_count();
  return n;
}

std::vector<float> UNet::flatten_params() const {
  std::vector<float> flat;
  flat.reserve(param_count());
  auto push = [&](const ConvLayer& l) {
    flat.insert(flat.end(), l.weights.begin(), l.weights.end());
    flat.insert(flat.end(), l.bias.begin(), l.bias.end());
  };
  for (const auto& l : encoder) push(l);
  for (const auto& l : decoder) push(l);
  push(head);
  return flat;
}

void UNet::load_params(const std::vector<float>& flat) {
  if (flat.size() != param_count())
    throw ShapeError("UNet::load_params: parameter count mismatch");
  std::size_t pos = 0;
  auto pull = [&](ConvLayer& l) {
    std::copy_n(flat.begin() + static_cast<std::ptrdiff_t>(pos), l.weights.size(),
                l.weights.begin());
    pos += l.weights.size();
    std::copy_n(flat.begin() + static_cast<std::ptrdiff_t>(pos), l.bias.size(),
                l.bias.begin());
    pos += l.bias.size();
  };
  for (auto& l : encoder) pull(l);
  for (auto& l : decoder) pull(l);
  pull(head);
}

Tensor unet_forward(const UNet& net, const Tensor& x, UNetTape* tape) {
  if (x.c != net.cfg.in_c) throw ShapeError("unet_forward: input channel mismatch");
  const int div = 1 << net.cfg.levels;
  if (x.h % div != 0 || x.w % div != 0)
    throw ShapeError("unet_forward: input dimensions must be divisible by 2^levels");

  std::vector<Tensor> enc_out;
  Tensor cur = x;
  for (const auto& l : net.encoder) {
    cur = conv_forward(l, cur);
    leaky_relu_inplace(cur, net.cfg.leaky_slope);
    enc_out.push_back(cur);
  }

  std::vector<Tensor> dec_cat, dec_out;
  const int L = net.cfg.levels;
  for (int k = 0; k < L; ++k) {
    Tensor up = upsample2x_nearest(cur);
    const Tensor& skip = (k < L - 1) ? enc_out[static_cast<std::size_t>(L - 2 - k)] : x;
    Tensor cat = concat_channels(up, skip);
    cur = conv_forward(net.decoder[static_cast<std::size_t>(k)], cat);
    leaky_relu_inplace(cur, net.cfg.leaky_slope);
    if (tape) {
      dec_cat.push_back(std::move(cat));
      dec_out.push_back(cur);
    }
  }
  Tensor out = conv_forward(net.head, cur);
  if (tape) {
    tape->input = x;
    tape->enc_out = std::move(enc_out);
    tape->dec_cat = std::move(dec_cat);
    tape->dec_out = std::move(dec_out);
    tape->output = out;
  }
  return out;
}

void UNetGrads::init_like(const UNet& net) {
  enc_w.clear(); enc_b.clear(); dec_w.clear(); dec_b.clear();
  for (const auto& l : net.encoder) {
    enc_w.emplace_back(l.weights.size(), 0.f);
    enc_b.emplace_back(l.bias.size(), 0.f);
  }
  for (const auto& l : net.decoder) {
    dec_w.emplace_back(l.weights.size(), 0.f);
    dec_b.emplace_back(l.bias.size(), 0.f);
  }
  head_w.assign(net.head.weights.size(), 0.f);
  head_b.assign(net.head.bias.size(), 0.f);
}

void UNetGrads::add(const UNetGrads& other) {
  auto axpy = [](std::vector<float>& a, const std::vector<float>& b) {
    for (std::size_t i = 0; i < a.size(); ++i) a[i] += b[i];
  };
  for (std::size_t i = 0; i < enc_w.size(); ++i) { axpy(enc_w[i], other.enc_w[i]); axpy(enc_b[i], other.enc_b[i]); }
  for (std::size_t i = 0; i < dec_w.size(); ++i) { axpy(dec_w[i], other.dec_w[i]); axpy(dec_b[i], other.dec_b[i]); }
  axpy(head_w, other.head_w);
  axpy(head_b, other.head_b);
}

void UNetGrads::scale(float s) {
  auto sc = [s](std::vector<float>& a) { for (float& v : a) v *= s; };
  for (auto& g : enc_w) sc(g);
  for (auto& g : enc_b) sc(g);
  for (auto& g : dec_w) sc(g);
  for (auto& g : dec_b) sc(g);
  sc(head_w);
  sc(head_b);
}

std::vector<float> UNetGrads::flatten() const {
  std::vector<float> flat;
  auto push = [&](const std::vector<float>& w, const std::vector<float>& b) {
    flat.insert(flat.end(), w.begin(), w.end());
    flat.insert(flat.end(), b.begin(), b.end());
  };
  for (std::size_t i = 0; i < enc_w.size(); ++i) push(enc_w[i], enc_b[i]);
  for (std::size_t i = 0; i < dec_w.size(); ++i) push(dec_w[i], dec_b[i]);
  push(head_w, head_b);
  return flat;
}

void unet_backward(const UNet& net, const UNetTape& tape, const Tensor& d_out,
                   UNetGrads& grads) {
  const int L = net.cfg.levels;
  const float slope = net.cfg.leaky_slope;

  Tensor d_cur;
  conv_backward(net.head, tape.dec_out[static_cast<std::size_t>(L - 1)], d_out,
                d_cur, grads.head_w, grads.head_b);

  // Skip-gradient accumulators for encoder outputs (and the raw input, unused).
  std::vector<Tensor> d_enc_out(static_cast<std::size_t>(L));

  for (int k = L - 1; k >= 0; --k) {
    const std::size_t ku = static_cast<std::size_t>(k);
    leaky_relu_backward_inplace(tape.dec_out[ku], d_cur, slope);
    Tensor d_cat;
    conv_backward(net.decoder[ku], tape.dec_cat[ku], d_cur, d_cat,
                  grads.dec_w[ku], grads.dec_b[ku]);
    const int skip_c = (k < L - 1) ? (net.cfg.base_channels << (L - 2 - k)) : net.cfg.in_c;
    Tensor d_up, d_skip;
    split_channels(d_cat, d_cat.c - skip_c, d_up, d_skip);
    if (k < L - 1) {
      const std::size_t ei = static_cast<std::size_t>(L - 2 - k);
      if (d_enc_out[ei].size() == 0) {
        d_enc_out[ei] = std::move(d_skip);
      } else {
        for (std::size_t i = 0; i < d_skip.data.size(); ++i)
          d_enc_out[ei].data[i] += d_skip.data[i];
      }
    }
    // gradient flowing to the block below via the upsample path
    d_cur = upsample2x_backward(d_up);
  }

  // d_cur now targets enc_out[L-1]; fold in any accumulated skip gradient.
  if (d_enc_out[static_cast<std::size_t>(L - 1)].size() != 0) {
    for (std::size_t i = 0; i < d_cur.data.size(); ++i)
      d_cur.data[i] += d_enc_out[static_cast<std::size_t>(L - 1)].data[i];
  }

  for (int i = L - 1; i >= 0; --i) {
    const std::size_t iu = static_cast<std::size_t>(i);
    leaky_relu_backward_inplace(tape.enc_out[iu], d_cur, slope);
    const Tensor& layer_in = (i == 0) ? tape.input : tape.enc_out[iu - 1];
    Tensor d_in;
    conv_backward(net.encoder[iu], layer_in, d_cur, d_in,
                  grads.enc_w[iu], grads.enc_b[iu]);
    if (i > 0) {
      d_cur = std::move(d_in);
      if (d_enc_out[iu - 1].size() != 0) {
        for (std::size_t j = 0; j < d_cur.data.size(); ++j)
          d_cur.data[j] += d_enc_out[iu - 1].data[j];
      }
    }
  }
}

void adam_step(std::vector<float>& params, const std::vector<float>& grads,
               AdamState& state, const AdamConfig& cfg) {
  if (params.size() != grads.size() || params.size() != state.m.size())
    throw ShapeError("adam_step: size mismatch");
  state.t += 1;
  const double b1t = 1.0 - std::pow(static_cast<double>(cfg.beta1), static_cast<double>(state.t));
  const double b2t = 1.0 - std::pow(static_cast<double>(cfg.beta2), static_cast<double>(state.t));
  for (std::size_t i = 0; i < params.size(); ++i) {
    const float g = grads[i];
    state.m[i] = cfg.beta1 * state.m[i] + (1.f - cfg.beta1) * g;
    state.v[i] = cfg.beta2 * state.v[i] + (1.f - cfg.beta2) * g * g;
    const double mhat = state.m[i] / b1t;
    const double vhat = state.v[i] / b2t;
    params[i] -= static_cast<float>(cfg.lr * mhat / (std::sqrt(vhat) + cfg.eps));
  }
}

}  // namespace flowfuse

// SPDX-License-Identifier: Apache-2.0
#include <cmath>
#include <cstring>

#include "mrfrecon/ops.hpp"

namespace mrf::ops {

namespace {

using ad::record;

// Cross-correlation with zero padding `pad` per side for 3-d volumes.
// in:  [Ci, D, H, W], ker: [Co, Ci, K, K, K], out: [Co, oD, oH, oW]
// where oX = X + 2*pad - K + 1. `out` must be zero-initialized (or bias-filled).
void xcorr3(const double* in, int64_t Ci, int64_t D, int64_t H, int64_t W, const double* ker,
            int64_t Co, int64_t K, int64_t pad, double* out) {
  int64_t Dp = D + 2 * pad, Hp = H + 2 * pad, Wp = W + 2 * pad;
  int64_t oD = Dp - K + 1, oH = Hp - K + 1, oW = Wp - K + 1;
  std::vector<double> xp;
  const double* src = in;
  if (pad > 0) {
    xp.assign(Ci * Dp * Hp * Wp, 0.0);
    for (int64_t c = 0; c < Ci; ++c)
      for (int64_t z = 0; z < D; ++z)
        for (int64_t y = 0; y < H; ++y)
          std::memcpy(xp.data() + ((c * Dp + z + pad) * Hp + y + pad) * Wp + pad,
                      in + ((c * D + z) * H + y) * W, sizeof(double) * W);
    src = xp.data();
  }
#pragma omp parallel for schedule(static)
  for (int64_t co = 0; co < Co; ++co) {
    double* oc = out + co * oD * oH * oW;
    for (int64_t ci = 0; ci < Ci; ++ci) {
      const double* icb = src + ci * Dp * Hp * Wp;
      for (int64_t kd = 0; kd < K; ++kd)
        for (int64_t kh = 0; kh < K; ++kh)
          for (int64_t kw = 0; kw < K; ++kw) {
            double wv = ker[(((co * Ci + ci) * K + kd) * K + kh) * K + kw];
            for (int64_t z = 0; z < oD; ++z)
              for (int64_t y = 0; y < oH; ++y) {
                const double* row = icb + ((z + kd) * Hp + y + kh) * Wp + kw;
                double* orow = oc + (z * oH + y) * oW;
                for (int64_t x = 0; x < oW; ++x) orow[x] += wv * row[x];
              }
          }
    }
  }
}

void xcorr2(const double* in, int64_t Ci, int64_t H, int64_t W, const double* ker, int64_t Co,
            int64_t K, int64_t pad, double* out) {
  int64_t Hp = H + 2 * pad, Wp = W + 2 * pad;
  int64_t oH = Hp - K + 1, oW = Wp - K + 1;
  std::vector<double> xp;
  const double* src = in;
  if (pad > 0) {
    xp.assign(Ci * Hp * Wp, 0.0);
    for (int64_t c = 0; c < Ci; ++c)
      for (int64_t y = 0; y < H; ++y)
        std::memcpy(xp.data() + (c * Hp + y + pad) * Wp + pad, in + (c * H + y) * W,
                    sizeof(double) * W);
    src = xp.data();
  }
#pragma omp parallel for schedule(static)
  for (int64_t co = 0; co < Co; ++co) {
    double* oc = out + co * oH * oW;
    for (int64_t ci = 0; ci < Ci; ++ci) {
      const double* icb = src + ci * Hp * Wp;
      for (int64_t kh = 0; kh < K; ++kh)
        for (int64_t kw = 0; kw < K; ++kw) {
          double wv = ker[((co * Ci + ci) * K + kh) * K + kw];
          for (int64_t y = 0; y < oH; ++y) {
            const double* row = icb + (y + kh) * Wp + kw;
            double* orow = oc + y * oW;
            for (int64_t x = 0; x < oW; ++x) orow[x] += wv * row[x];
          }
        }
    }
  }
}

// flip kernel taps and swap in/out channel roles: [Co,Ci,K..] -> [Ci,Co,Kflip..]
std::vector<double> flip_swap(const double* ker, int64_t Co, int64_t Ci, int64_t K, int rank) {
  int64_t taps = 1;
  for (int r = 0; r < rank; ++r) taps *= K;
  std::vector<double> t(Ci * Co * taps);
  for (int64_t co = 0; co < Co; ++co)
    for (int64_t ci = 0; ci < Ci; ++ci)
      for (int64_t j = 0; j < taps; ++j)
        t[(ci * Co + co) * taps + (taps - 1 - j)] = ker[(co * Ci + ci) * taps + j];
  return t;
}

// gw[co,ci,taps] = sum over out voxels of gout[co] * padded_in[ci] shifted by tap
void conv3_wgrad(const double* in, int64_t Ci, int64_t D, int64_t H, int64_t W,
                 const double* gout, int64_t Co, int64_t K, int64_t pad, double* gw) {
  int64_t Dp = D + 2 * pad, Hp = H + 2 * pad, Wp = W + 2 * pad;
  int64_t oD = Dp - K + 1, oH = Hp - K + 1, oW = Wp - K + 1;
  std::vector<double> xp;
  const double* src = in;
  if (pad > 0) {
    xp.assign(Ci * Dp * Hp * Wp, 0.0);
    for (int64_t c = 0; c < Ci; ++c)
      for (int64_t z = 0; z < D; ++z)
        for (int64_t y = 0; y < H; ++y)
          std::memcpy(xp.data() + ((c * Dp + z + pad) * Hp + y + pad) * Wp + pad,
                      in + ((c * D + z) * H + y) * W, sizeof(double) * W);
    src = xp.data();
  }
#pragma omp parallel for schedule(static)
  for (int64_t co = 0; co < Co; ++co) {
    const double* gc = gout + co * oD * oH * oW;
    for (int64_t ci = 0; ci < Ci; ++ci) {
      const double* icb = src + ci * Dp * Hp * Wp;
      for (int64_t kd = 0; kd < K; ++kd)
        for (int64_t kh = 0; kh < K; ++kh)
          for (int64_t kw = 0; kw < K; ++kw) {
            double s = 0.0;
            for (int64_t z = 0; z < oD; ++z)
              for (int64_t y = 0; y < oH; ++y) {
                const double* row = icb + ((z + kd) * Hp + y + kh) * Wp + kw;
                const double* grow = gc + (z * oH + y) * oW;
                for (int64_t x = 0; x < oW; ++x) s += grow[x] * row[x];
              }
            gw[(((co * Ci + ci) * K + kd) * K + kh) * K + kw] = s;
          }
    }
  }
}

void conv2_wgrad(const double* in, int64_t Ci, int64_t H, int64_t W, const double* gout,
                 int64_t Co, int64_t K, int64_t pad, double* gw) {
  int64_t Hp = H + 2 * pad, Wp = W + 2 * pad;
  int64_t oH = Hp - K + 1, oW = Wp - K + 1;
  std::vector<double> xp;
  const double* src = in;
  if (pad > 0) {
    xp.assign(Ci * Hp * Wp, 0.0);
    for (int64_t c = 0; c < Ci; ++c)
      for (int64_t y = 0; y < H; ++y)
        std::memcpy(xp.data() + (c * Hp + y + pad) * Wp + pad, in + (c * H + y) * W,
                    sizeof(double) * W);
    src = xp.data();
  }
#pragma omp parallel for schedule(static)
  for (int64_t co = 0; co < Co; ++co) {
    const double* gc = gout + co * oH * oW;
    for (int64_t ci = 0; ci < Ci; ++ci) {
      const double* icb = src + ci * Hp * Wp;
      for (int64_t kh = 0; kh < K; ++kh)
        for (int64_t kw = 0; kw < K; ++kw) {
          double s = 0.0;
          for (int64_t y = 0; y < oH; ++y) {
            const double* row = icb + (y + kh) * Wp + kw;
            const double* grow = gc + y * oW;
            for (int64_t x = 0; x < oW; ++x) s += grow[x] * row[x];
          }
          gw[((co * Ci + ci) * K + kh) * K + kw] = s;
        }
    }
  }
}

}  // namespace

Tensor conv3d(const Tensor& x, const Tensor& w, const Tensor& bias, bool same) {
  require(!x.is_complex() && !w.is_complex(), "conv3d: real tensors only");
  require(x.shape().size() == 4 && w.shape().size() == 5,
          "conv3d: expects x [Ci,D,H,W], w [Co,Ci,K,K,K]; got " + shape_str(x.shape()) + ", " +
              shape_str(w.shape()));
  int64_t Ci = x.shape()[0], D = x.shape()[1], H = x.shape()[2], W = x.shape()[3];
  int64_t Co = w.shape()[0], K = w.shape()[2];
  require(w.shape()[1] == Ci, "conv3d: weight expects " + std::to_string(w.shape()[1]) +
                                  " input channels, input has " + std::to_string(Ci));
  require(w.shape()[3] == K && w.shape()[4] == K && K % 2 == 1, "conv3d: kernel must be cubic odd");
  int64_t pad = same ? (K - 1) / 2 : 0;
  int64_t oD = D + 2 * pad - K + 1, oH = H + 2 * pad - K + 1, oW = W + 2 * pad - K + 1;
  require(oD > 0 && oH > 0 && oW > 0, "conv3d: kernel " + std::to_string(K) +
                                          " too large for input " + shape_str(x.shape()));
  Tensor out = Tensor::zeros({Co, oD, oH, oW}, DType::Real64);
  if (bias.defined()) {
    require(bias.shape() == Shape{Co}, "conv3d: bias shape " + shape_str(bias.shape()));
    double* po = out.mutable_data();
    for (int64_t co = 0; co < Co; ++co) {
      double bv = bias.at(co);
      for (int64_t i = 0; i < oD * oH * oW; ++i) po[co * oD * oH * oW + i] = bv;
    }
  }
  xcorr3(x.data(), Ci, D, H, W, w.data(), Co, K, pad, out.mutable_data());

  auto nx = x.node(), nw = w.node(), nb = bias.defined() ? bias.node() : nullptr;
  Tensor sx = x.detached(), sw = w.detached();
  std::vector<Tensor> ins{x, w};
  if (bias.defined()) ins.push_back(bias);
  record(out, ins, sx.buffer_len() + sw.buffer_len(),
         [nx, nw, nb, sx, sw, Ci, D, H, W, Co, K, pad, oD, oH, oW](const Tensor& g) {
           if (nx) {
             Tensor gx = Tensor::zeros({Ci, D, H, W}, DType::Real64);
             auto kt = flip_swap(sw.data(), Co, Ci, K, 3);
             xcorr3(g.data(), Co, oD, oH, oW, kt.data(), Ci, K, K - 1 - pad, gx.mutable_data());
             nx->accumulate(gx);
           }
           if (nw) {
             Tensor gw = Tensor::zeros({Co, Ci, K, K, K}, DType::Real64);
             conv3_wgrad(sx.data(), Ci, D, H, W, g.data(), Co, K, pad, gw.mutable_data());
             nw->accumulate(gw);
           }
           if (nb) {
             Tensor gb = Tensor::zeros({Co}, DType::Real64);
             const double* pg = g.data();
             for (int64_t co = 0; co < Co; ++co) {
               double s = 0.0;
               for (int64_t i = 0; i < oD * oH * oW; ++i) s += pg[co * oD * oH * oW + i];
               gb.set(co, s);
             }
             nb->accumulate(gb);
           }
         });
  return out;
}

Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor& bias, bool same) {
  require(!x.is_complex() && !w.is_complex(), "conv2d: real tensors only");
  require(x.shape().size() == 3 && w.shape().size() == 4,
          "conv2d: expects x [Ci,H,W], w [Co,Ci,K,K]; got " + shape_str(x.shape()) + ", " +
              shape_str(w.shape()));
  int64_t Ci = x.shape()[0], H = x.shape()[1], W = x.shape()[2];
  int64_t Co = w.shape()[0], K = w.shape()[2];
  require(w.shape()[1] == Ci, "conv2d: weight expects " + std::to_string(w.shape()[1]) +
                                  " input channels, input has " + std::to_string(Ci));
  require(w.shape()[3] == K && K % 2 == 1, "conv2d: kernel must be square odd");
  int64_t pad = same ? (K - 1) / 2 : 0;
  int64_t oH = H + 2 * pad - K + 1, oW = W + 2 * pad - K + 1;
  require(oH > 0 && oW > 0, "conv2d: kernel " + std::to_string(K) + " too large for input " +
                                shape_str(x.shape()));
  Tensor out = Tensor::zeros({Co, oH, oW}, DType::Real64);
  if (bias.defined()) {
    require(bias.shape() == Shape{Co}, "conv2d: bias shape " + shape_str(bias.shape()));
    double* po = out.mutable_data();
    for (int64_t co = 0; co < Co; ++co) {
      double bv = bias.at(co);
      for (int64_t i = 0; i < oH * oW; ++i) po[co * oH * oW + i] = bv;
    }
  }
  xcorr2(x.data(), Ci, H, W, w.data(), Co, K, pad, out.mutable_data());

  auto nx = x.node(), nw = w.node(), nb = bias.defined() ? bias.node() : nullptr;
  Tensor sx = x.detached(), sw = w.detached();
  std::vector<Tensor> ins{x, w};
  if (bias.defined()) ins.push_back(bias);
  record(out, ins, sx.buffer_len() + sw.buffer_len(),
         [nx, nw, nb, sx, sw, Ci, H, W, Co, K, pad, oH, oW](const Tensor& g) {
           if (nx) {
             Tensor gx = Tensor::zeros({Ci, H, W}, DType::Real64);
             auto kt = flip_swap(sw.data(), Co, Ci, K, 2);
             xcorr2(g.data(), Co, oH, oW, kt.data(), Ci, K, K - 1 - pad, gx.mutable_data());
             nx->accumulate(gx);
           }
           if (nw) {
             Tensor gw = Tensor::zeros({Co, Ci, K, K}, DType::Real64);
             conv2_wgrad(sx.data(), Ci, H, W, g.data(), Co, K, pad, gw.mutable_data());
             nw->accumulate(gw);
           }
           if (nb) {
             Tensor gb = Tensor::zeros({Co}, DType::Real64);
             const double* pg = g.data();
             for (int64_t co = 0; co < Co; ++co) {
               double s = 0.0;
               for (int64_t i = 0; i < oH * oW; ++i) s += pg[co * oH * oW + i];
               gb.set(co, s);
             }
             nb->accumulate(gb);
           }
         });
  return out;
}

Tensor group_norm(const Tensor& x, int64_t groups, const Tensor& gamma, const Tensor& beta,
                  double eps) {
  require(!x.is_complex(), "group_norm: real input only");
  int64_t C = x.shape()[0];
  require(C % groups == 0, "group_norm: " + std::to_string(C) + " channels not divisible into " +
                               std::to_string(groups) + " groups");
  int64_t S = 1;
  for (size_t d = 1; d < x.shape().size(); ++d) S *= x.shape()[d];
  require(gamma.shape() == Shape{C} && beta.shape() == Shape{C}, "group_norm: affine shape");
  int64_t Cg = C / groups;
  int64_t N = Cg * S;

  Tensor xhat = Tensor::zeros(x.shape(), DType::Real64);
  Tensor invstd = Tensor::zeros({groups}, DType::Real64);
  const double* px = x.data();
  double* ph = xhat.mutable_data();
  for (int64_t g = 0; g < groups; ++g) {
    const double* base = px + g * Cg * S;
    double mu = 0.0;
    for (int64_t i = 0; i < N; ++i) mu += base[i];
    mu /= static_cast<double>(N);
    double var = 0.0;
    for (int64_t i = 0; i < N; ++i) {
      double d = base[i] - mu;
      var += d * d;
    }
    var /= static_cast<double>(N);
    double is = 1.0 / std::sqrt(var + eps);
    invstd.set(g, is);
    double* hb = ph + g * Cg * S;
    for (int64_t i = 0; i < N; ++i) hb[i] = (base[i] - mu) * is;
  }
  Tensor out = Tensor::zeros(x.shape(), DType::Real64);
  double* po = out.mutable_data();
  for (int64_t c = 0; c < C; ++c) {
    double gv = gamma.at(c), bv = beta.at(c);
    for (int64_t s = 0; s < S; ++s) po[c * S + s] = gv * ph[c * S + s] + bv;
  }

  auto nx = x.node(), ng = gamma.node(), nb = beta.node();
  Tensor sg = gamma.detached();
  record(out, {x, gamma, beta}, xhat.buffer_len() + invstd.buffer_len() + sg.buffer_len(),
         [nx, ng, nb, xhat, invstd, sg, groups, Cg, S, C, N](const Tensor& g) {
           const double* ph = xhat.data();
           const double* pg = g.data();
           if (ng) {
             Tensor ggm = Tensor::zeros({C}, DType::Real64);
             for (int64_t c = 0; c < C; ++c) {
               double s = 0.0;
               for (int64_t i = 0; i < S; ++i) s += pg[c * S + i] * ph[c * S + i];
               ggm.set(c, s);
             }
             ng->accumulate(ggm);
           }
           if (nb) {
             Tensor gb = Tensor::zeros({C}, DType::Real64);
             for (int64_t c = 0; c < C; ++c) {
               double s = 0.0;
               for (int64_t i = 0; i < S; ++i) s += pg[c * S + i];
               gb.set(c, s);
             }
             nb->accumulate(gb);
           }
           if (nx) {
             Tensor gx = Tensor::zeros(xhat.shape(), DType::Real64);
             double* po = gx.mutable_data();
             for (int64_t grp = 0; grp < groups; ++grp) {
               double sum_gh = 0.0, sum_ghh = 0.0;
               for (int64_t c = grp * Cg; c < (grp + 1) * Cg; ++c) {
                 double gv = sg.at(c);
                 for (int64_t i = 0; i < S; ++i) {
                   double gh = pg[c * S + i] * gv;
                   sum_gh += gh;
                   sum_ghh += gh * ph[c * S + i];
                 }
               }
               double m1 = sum_gh / static_cast<double>(N);
               double m2 = sum_ghh / static_cast<double>(N);
               double is = invstd.at(grp);
               for (int64_t c = grp * Cg; c < (grp + 1) * Cg; ++c) {
                 double gv = sg.at(c);
                 for (int64_t i = 0; i < S; ++i) {
                   double gh = pg[c * S + i] * gv;
                   po[c * S + i] = is * (gh - m1 - ph[c * S + i] * m2);
                 }
               }
             }
             nx->accumulate(gx);
           }
         });
  return out;
}

Tensor film(const Tensor& x, const Tensor& gamma, const Tensor& beta) {
  require(!x.is_complex(), "film: real input only");
  int64_t C = x.shape()[0];
  require(gamma.shape() == Shape{C} && beta.shape() == Shape{C},
          "film: modulation shape mismatch for " + std::to_string(C) + " channels");
  int64_t S = 1;
  for (size_t d = 1; d < x.shape().size(); ++d) S *= x.shape()[d];
  Tensor out = Tensor::zeros(x.shape(), DType::Real64);
  const double* px = x.data();
  double* po = out.mutable_data();
  for (int64_t c = 0; c < C; ++c) {
    double gv = 1.0 + gamma.at(c), bv = beta.at(c);
    for (int64_t s = 0; s < S; ++s) po[c * S + s] = gv * px[c * S + s] + bv;
  }
  auto nx = x.node(), ng = gamma.node(), nb = beta.node();
  Tensor sx = x.detached(), sg = gamma.detached();
  record(out, {x, gamma, beta}, sx.buffer_len() + sg.buffer_len(),
         [nx, ng, nb, sx, sg, C, S](const Tensor& g) {
           const double* pg = g.data();
           const double* px = sx.data();
           if (nx) {
             Tensor gx = Tensor::zeros(sx.shape(), DType::Real64);
             double* po = gx.mutable_data();
             for (int64_t c = 0; c < C; ++c) {
               double gv = 1.0 + sg.at(c);
               for (int64_t s = 0; s < S; ++s) po[c * S + s] = gv * pg[c * S + s];
             }
             nx->accumulate(gx);
           }
           if (ng) {
             Tensor ggm = Tensor::zeros({C}, DType::Real64);
             for (int64_t c = 0; c < C; ++c) {
               double s = 0.0;
               for (int64_t i = 0; i < S; ++i) s += pg[c * S + i] * px[c * S + i];
               ggm.set(c, s);
             }
             ng->accumulate(ggm);
           }
           if (nb) {
             Tensor gb = Tensor::zeros({C}, DType::Real64);
             for (int64_t c = 0; c < C; ++c) {
               double s = 0.0;
               for (int64_t i = 0; i < S; ++i) s += pg[c * S + i];
               gb.set(c, s);
             }
             nb->accumulate(gb);
           }
         });
  return out;
}

Tensor chan_scale(const Tensor& x, const Tensor& s) {
  require(!x.is_complex(), "chan_scale: real input only");
  int64_t C = x.shape()[0];
  require(s.shape() == Shape{C}, "chan_scale: gate shape " + shape_str(s.shape()) + " for " +
                                     std::to_string(C) + " channels");
  int64_t S = 1;
  for (size_t d = 1; d < x.shape().size(); ++d) S *= x.shape()[d];
  Tensor out = Tensor::zeros(x.shape(), DType::Real64);
  const double* px = x.data();
  double* po = out.mutable_data();
  for (int64_t c = 0; c < C; ++c) {
    double sv = s.at(c);
    for (int64_t i = 0; i < S; ++i) po[c * S + i] = sv * px[c * S + i];
  }
  auto nx = x.node(), ns = s.node();
  Tensor sx = x.detached(), ss = s.detached();
  record(out, {x, s}, sx.buffer_len() + ss.buffer_len(), [nx, ns, sx, ss, C, S](const Tensor& g) {
    const double* pg = g.data();
    if (nx) {
      Tensor gx = Tensor::zeros(sx.shape(), DType::Real64);
      double* po = gx.mutable_data();
      for (int64_t c = 0; c < C; ++c) {
        double sv = ss.at(c);
        for (int64_t i = 0; i < S; ++i) po[c * S + i] = sv * pg[c * S + i];
      }
      nx->accumulate(gx);
    }
    if (ns) {
      Tensor gs = Tensor::zeros({C}, DType::Real64);
      const double* px = sx.data();
      for (int64_t c = 0; c < C; ++c) {
        double acc = 0.0;
        for (int64_t i = 0; i < S; ++i) acc += pg[c * S + i] * px[c * S + i];
        gs.set(c, acc);
      }
      ns->accumulate(gs);
    }
  });
  return out;
}

}  // namespace mrf::ops

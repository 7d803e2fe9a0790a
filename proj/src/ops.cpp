// SPDX-License-Identifier: Apache-2.0
#include "mrfrecon/ops.hpp"

#include <cmath>
#include <cstring>

#include "mrfrecon/fft.hpp"

namespace mrf::ops {

namespace {

using ad::record;

void acc(const std::shared_ptr<ad::Node>& n, const Tensor& g) {
  if (n) n->accumulate(g);
}

void check_same(const Tensor& a, const Tensor& b, const char* op) {
  require(a.defined() && b.defined(), std::string(op) + ": undefined input");
  require(a.shape() == b.shape() && a.dtype() == b.dtype(),
          std::string(op) + ": mismatched operands " + shape_str(a.shape()) + " vs " +
              shape_str(b.shape()));
}

void check_real(const Tensor& a, const char* op) {
  require(a.defined() && !a.is_complex(), std::string(op) + ": expects a real tensor");
}

int64_t spatial_of(const Tensor& x) {
  int64_t s = 1;
  for (size_t d = 1; d < x.shape().size(); ++d) s *= x.shape()[d];
  return s;
}

Tensor map_buffers(const Tensor& a, const Tensor& b, const char* op,
                   const std::function<double(double, double)>& f) {
  check_same(a, b, op);
  Tensor out = Tensor::zeros(a.shape(), a.dtype());
  const double* pa = a.data();
  const double* pb = b.data();
  double* po = out.mutable_data();
  int64_t n = a.buffer_len();
  for (int64_t i = 0; i < n; ++i) po[i] = f(pa[i], pb[i]);
  return out;
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  Tensor out = map_buffers(a, b, "add", [](double x, double y) { return x + y; });
  auto na = a.node(), nb = b.node();
  record(out, {a, b}, 0, [na, nb](const Tensor& g) {
    acc(na, g);
    acc(nb, g);
  });
  return out;
}

Tensor sub(const Tensor& a, const Tensor& b) {
  Tensor out = map_buffers(a, b, "sub", [](double x, double y) { return x - y; });
  auto na = a.node(), nb = b.node();
  record(out, {a, b}, 0, [na, nb](const Tensor& g) {
    acc(na, g);
    if (nb) {
      Tensor gb = Tensor::zeros(g.shape(), g.dtype());
      const double* pg = g.data();
      double* pb = gb.mutable_data();
      for (int64_t i = 0; i < g.buffer_len(); ++i) pb[i] = -pg[i];
      nb->accumulate(gb);
    }
  });
  return out;
}

Tensor mul(const Tensor& a, const Tensor& b) {
  check_same(a, b, "mul");
  Tensor out = Tensor::zeros(a.shape(), a.dtype());
  int64_t n = a.numel();
  if (a.is_complex()) {
    for (int64_t i = 0; i < n; ++i) out.cset(i, a.cat(i) * b.cat(i));
  } else {
    const double* pa = a.data();
    const double* pb = b.data();
    double* po = out.mutable_data();
    for (int64_t i = 0; i < n; ++i) po[i] = pa[i] * pb[i];
  }
  auto na = a.node(), nb = b.node();
  Tensor sa = a.detached(), sb = b.detached();
  record(out, {a, b}, sa.buffer_len() + sb.buffer_len(), [na, nb, sa, sb](const Tensor& g) {
    int64_t n = sa.numel();
    bool cx = sa.is_complex();
    if (na) {
      Tensor ga = Tensor::zeros(sa.shape(), sa.dtype());
      if (cx)
        for (int64_t i = 0; i < n; ++i) ga.cset(i, std::conj(sb.cat(i)) * g.cat(i));
      else
        for (int64_t i = 0; i < n; ++i) ga.set(i, sb.at(i) * g.at(i));
      na->accumulate(ga);
    }
    if (nb) {
      Tensor gb = Tensor::zeros(sb.shape(), sb.dtype());
      if (cx)
        for (int64_t i = 0; i < n; ++i) gb.cset(i, std::conj(sa.cat(i)) * g.cat(i));
      else
        for (int64_t i = 0; i < n; ++i) gb.set(i, sa.at(i) * g.at(i));
      nb->accumulate(gb);
    }
  });
  return out;
}

Tensor div(const Tensor& a, const Tensor& b) {
  check_real(a, "div");
  Tensor out = map_buffers(a, b, "div", [](double x, double y) { return x / y; });
  auto na = a.node(), nb = b.node();
  Tensor sb = b.detached(), so = out.detached();
  record(out, {a, b}, sb.buffer_len() + so.buffer_len(), [na, nb, sb, so](const Tensor& g) {
    int64_t n = sb.numel();
    if (na) {
      Tensor ga = Tensor::zeros(sb.shape(), DType::Real64);
      for (int64_t i = 0; i < n; ++i) ga.set(i, g.at(i) / sb.at(i));
      na->accumulate(ga);
    }
    if (nb) {
      Tensor gb = Tensor::zeros(sb.shape(), DType::Real64);
      for (int64_t i = 0; i < n; ++i) gb.set(i, -g.at(i) * so.at(i) / sb.at(i));
      nb->accumulate(gb);
    }
  });
  return out;
}

Tensor neg(const Tensor& a) { return scale(a, -1.0); }

Tensor scale(const Tensor& a, double s) {
  Tensor out = Tensor::zeros(a.shape(), a.dtype());
  const double* pa = a.data();
  double* po = out.mutable_data();
  for (int64_t i = 0; i < a.buffer_len(); ++i) po[i] = s * pa[i];
  auto na = a.node();
  record(out, {a}, 0, [na, s](const Tensor& g) {
    if (!na) return;
    Tensor ga = Tensor::zeros(g.shape(), g.dtype());
    const double* pg = g.data();
    double* po = ga.mutable_data();
    for (int64_t i = 0; i < g.buffer_len(); ++i) po[i] = s * pg[i];
    na->accumulate(ga);
  });
  return out;
}

Tensor cscale(const Tensor& a, cplx s) {
  require(a.is_complex(), "cscale: expects a complex tensor");
  Tensor out = Tensor::zeros(a.shape(), a.dtype());
  for (int64_t i = 0; i < a.numel(); ++i) out.cset(i, s * a.cat(i));
  auto na = a.node();
  record(out, {a}, 0, [na, s](const Tensor& g) {
    if (!na) return;
    Tensor ga = Tensor::zeros(g.shape(), g.dtype());
    cplx cs = std::conj(s);
    for (int64_t i = 0; i < g.numel(); ++i) ga.cset(i, cs * g.cat(i));
    na->accumulate(ga);
  });
  return out;
}

Tensor add_scalar(const Tensor& a, double s) {
  check_real(a, "add_scalar");
  Tensor out = Tensor::zeros(a.shape(), a.dtype());
  const double* pa = a.data();
  double* po = out.mutable_data();
  for (int64_t i = 0; i < a.buffer_len(); ++i) po[i] = pa[i] + s;
  auto na = a.node();
  record(out, {a}, 0, [na](const Tensor& g) { acc(na, g); });
  return out;
}

namespace {

// real unary op with pointwise derivative computed from (x, out)
Tensor unary_real(const Tensor& a, const char* op, double (*f)(double),
                  double (*df_from_x_y)(double, double)) {
  check_real(a, op);
  Tensor out = Tensor::zeros(a.shape(), a.dtype());
  const double* pa = a.data();
  double* po = out.mutable_data();
  int64_t n = a.numel();
  for (int64_t i = 0; i < n; ++i) po[i] = f(pa[i]);
  auto na = a.node();
  Tensor sa = a.detached(), so = out.detached();
  record(out, {a}, sa.buffer_len() + so.buffer_len(), [na, sa, so, df_from_x_y](const Tensor& g) {
    if (!na) return;
    Tensor ga = Tensor::zeros(sa.shape(), DType::Real64);
    for (int64_t i = 0; i < sa.numel(); ++i)
      ga.set(i, g.at(i) * df_from_x_y(sa.at(i), so.at(i)));
    na->accumulate(ga);
  });
  return out;
}

}  // namespace

Tensor exp(const Tensor& a) {
  return unary_real(a, "exp", [](double x) { return std::exp(x); },
                    [](double, double y) { return y; });
}

Tensor sqrt(const Tensor& a) {
  return unary_real(a, "sqrt", [](double x) { return std::sqrt(x); },
                    [](double, double y) { return 0.5 / y; });
}

Tensor relu(const Tensor& a) {
  return unary_real(a, "relu", [](double x) { return x > 0.0 ? x : 0.0; },
                    [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

Tensor abs_real(const Tensor& a) {
  return unary_real(a, "abs", [](double x) { return std::abs(x); },
                    [](double x, double) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); });
}

Tensor silu(const Tensor& a) {
  return unary_real(a, "silu",
                    [](double x) { return x / (1.0 + std::exp(-x)); },
                    [](double x, double) {
                      double s = 1.0 / (1.0 + std::exp(-x));
                      return s * (1.0 + x * (1.0 - s));
                    });
}

Tensor sigmoid(const Tensor& a) {
  return unary_real(a, "sigmoid", [](double x) { return 1.0 / (1.0 + std::exp(-x)); },
                    [](double, double y) { return y * (1.0 - y); });
}

Tensor pow_const(const Tensor& a, double p) {
  check_real(a, "pow_const");
  Tensor out = Tensor::zeros(a.shape(), a.dtype());
  for (int64_t i = 0; i < a.numel(); ++i) out.set(i, std::pow(a.at(i), p));
  auto na = a.node();
  Tensor sa = a.detached();
  record(out, {a}, sa.buffer_len(), [na, sa, p](const Tensor& g) {
    if (!na) return;
    Tensor ga = Tensor::zeros(sa.shape(), DType::Real64);
    for (int64_t i = 0; i < sa.numel(); ++i)
      ga.set(i, g.at(i) * p * std::pow(sa.at(i), p - 1.0));
    na->accumulate(ga);
  });
  return out;
}

Tensor cmod(const Tensor& z) {
  require(z.is_complex(), "cmod: expects a complex tensor");
  Tensor out = Tensor::zeros(z.shape(), DType::Real64);
  for (int64_t i = 0; i < z.numel(); ++i) out.set(i, std::abs(z.cat(i)));
  auto nz = z.node();
  Tensor sz = z.detached();
  record(out, {z}, sz.buffer_len(), [nz, sz](const Tensor& g) {
    if (!nz) return;
    Tensor gz = Tensor::zeros(sz.shape(), DType::Complex128);
    for (int64_t i = 0; i < sz.numel(); ++i) {
      cplx v = sz.cat(i);
      double m = std::abs(v);
      gz.cset(i, m > 0.0 ? g.at(i) * v / m : cplx{0.0, 0.0});
    }
    nz->accumulate(gz);
  });
  return out;
}

Tensor scale_by(const Tensor& x, const Tensor& s) {
  require(s.defined() && s.numel() == 1 && !s.is_complex(), "scale_by: scale must be real scalar");
  double sv = s.at(0);
  Tensor out = Tensor::zeros(x.shape(), x.dtype());
  const double* px = x.data();
  double* po = out.mutable_data();
  for (int64_t i = 0; i < x.buffer_len(); ++i) po[i] = sv * px[i];
  auto nx = x.node(), ns = s.node();
  Tensor sx = x.detached();
  record(out, {x, s}, sx.buffer_len(), [nx, ns, sx, sv](const Tensor& g) {
    if (nx) {
      Tensor gx = Tensor::zeros(sx.shape(), sx.dtype());
      const double* pg = g.data();
      double* po = gx.mutable_data();
      for (int64_t i = 0; i < gx.buffer_len(); ++i) po[i] = sv * pg[i];
      nx->accumulate(gx);
    }
    if (ns) {
      double d = 0.0;
      const double* pg = g.data();
      const double* px = sx.data();
      for (int64_t i = 0; i < sx.buffer_len(); ++i) d += px[i] * pg[i];
      ns->accumulate(Tensor::scalar(d));
    }
  });
  return out;
}

Tensor mul_spatial(const Tensor& x, const Tensor& m) {
  require(!m.is_complex(), "mul_spatial: mask must be real");
  require(m.node() == nullptr, "mul_spatial: mask must not require grad");
  int64_t S = spatial_of(x);
  require(m.numel() == S, "mul_spatial: mask size " + std::to_string(m.numel()) +
                              " != spatial size " + std::to_string(S));
  int64_t C = x.shape()[0];
  int pe = per_elem(x.dtype());
  Tensor out = Tensor::zeros(x.shape(), x.dtype());
  const double* px = x.data();
  const double* pm = m.data();
  double* po = out.mutable_data();
  for (int64_t c = 0; c < C; ++c)
    for (int64_t s = 0; s < S; ++s)
      for (int p = 0; p < pe; ++p) po[(c * S + s) * pe + p] = px[(c * S + s) * pe + p] * pm[s];
  auto nx = x.node();
  Tensor sm = m.detached();
  record(out, {x}, sm.buffer_len(), [nx, sm, C, S, pe](const Tensor& g) {
    if (!nx) return;
    Tensor gx = Tensor::zeros(g.shape(), g.dtype());
    const double* pg = g.data();
    const double* pm = sm.data();
    double* po = gx.mutable_data();
    for (int64_t c = 0; c < C; ++c)
      for (int64_t s = 0; s < S; ++s)
        for (int p = 0; p < pe; ++p)
          po[(c * S + s) * pe + p] = pg[(c * S + s) * pe + p] * pm[s];
    nx->accumulate(gx);
  });
  return out;
}

Tensor sum(const Tensor& a) {
  check_real(a, "sum");
  double s = 0.0;
  for (int64_t i = 0; i < a.numel(); ++i) s += a.at(i);
  Tensor out = Tensor::scalar(s);
  auto na = a.node();
  Shape sh = a.shape();
  record(out, {a}, 0, [na, sh](const Tensor& g) {
    if (!na) return;
    Tensor ga = Tensor::zeros(sh, DType::Real64);
    double gv = g.at(0);
    double* po = ga.mutable_data();
    for (int64_t i = 0; i < ga.numel(); ++i) po[i] = gv;
    na->accumulate(ga);
  });
  return out;
}

Tensor mean(const Tensor& a) { return scale(sum(a), 1.0 / static_cast<double>(a.numel())); }

Tensor sum_sqmod(const Tensor& a) {
  double s = 0.0;
  const double* pa = a.data();
  for (int64_t i = 0; i < a.buffer_len(); ++i) s += pa[i] * pa[i];
  Tensor out = Tensor::scalar(s);
  auto na = a.node();
  Tensor sa = a.detached();
  record(out, {a}, sa.buffer_len(), [na, sa](const Tensor& g) {
    if (!na) return;
    Tensor ga = Tensor::zeros(sa.shape(), sa.dtype());
    double gv = 2.0 * g.at(0);
    const double* px = sa.data();
    double* po = ga.mutable_data();
    for (int64_t i = 0; i < sa.buffer_len(); ++i) po[i] = gv * px[i];
    na->accumulate(ga);
  });
  return out;
}

Tensor global_mean(const Tensor& x) {
  check_real(x, "global_mean");
  int64_t C = x.shape()[0], S = spatial_of(x);
  Tensor out = Tensor::zeros({C}, DType::Real64);
  const double* px = x.data();
  for (int64_t c = 0; c < C; ++c) {
    double s = 0.0;
    for (int64_t i = 0; i < S; ++i) s += px[c * S + i];
    out.set(c, s / static_cast<double>(S));
  }
  auto nx = x.node();
  Shape sh = x.shape();
  record(out, {x}, 0, [nx, sh, C, S](const Tensor& g) {
    if (!nx) return;
    Tensor gx = Tensor::zeros(sh, DType::Real64);
    double* po = gx.mutable_data();
    for (int64_t c = 0; c < C; ++c) {
      double gv = g.at(c) / static_cast<double>(S);
      for (int64_t i = 0; i < S; ++i) po[c * S + i] = gv;
    }
    nx->accumulate(gx);
  });
  return out;
}

namespace {

// C = A(ma x ka) * B(kb x nb) with optional conjugate-transpose on each side.
// All tensors share one dtype.
Tensor gemm(const Tensor& A, bool atr, const Tensor& B, bool btr) {
  int64_t am = A.shape()[0], ak = A.shape()[1];
  int64_t bm = B.shape()[0], bk = B.shape()[1];
  int64_t m = atr ? ak : am, k = atr ? am : ak;
  int64_t k2 = btr ? bk : bm, n = btr ? bm : bk;
  require(k == k2, "matmul: inner dims " + std::to_string(k) + " vs " + std::to_string(k2));
  Tensor out = Tensor::zeros({m, n}, A.dtype());
  if (A.is_complex()) {
    for (int64_t i = 0; i < m; ++i)
      for (int64_t j = 0; j < n; ++j) {
        cplx s{0.0, 0.0};
        for (int64_t l = 0; l < k; ++l) {
          cplx av = atr ? std::conj(A.cat(l * ak + i)) : A.cat(i * ak + l);
          cplx bv = btr ? std::conj(B.cat(j * bk + l)) : B.cat(l * bk + j);
          s += av * bv;
        }
        out.cset(i * n + j, s);
      }
  } else {
    for (int64_t i = 0; i < m; ++i)
      for (int64_t j = 0; j < n; ++j) {
        double s = 0.0;
        for (int64_t l = 0; l < k; ++l) {
          double av = atr ? A.at(l * ak + i) : A.at(i * ak + l);
          double bv = btr ? B.at(j * bk + l) : B.at(l * bk + j);
          s += av * bv;
        }
        out.set(i * n + j, s);
      }
  }
  return out;
}

}  // namespace

Tensor matmul(const Tensor& A, const Tensor& B) {
  require(A.shape().size() == 2 && B.shape().size() == 2,
          "matmul: expects 2-d operands, got " + shape_str(A.shape()) + " and " +
              shape_str(B.shape()));
  require(A.dtype() == B.dtype(), "matmul: mixed dtypes");
  Tensor out = gemm(A, false, B, false);
  auto na = A.node(), nb = B.node();
  Tensor sa = A.detached(), sb = B.detached();
  record(out, {A, B}, sa.buffer_len() + sb.buffer_len(), [na, nb, sa, sb](const Tensor& g) {
    if (na) na->accumulate(gemm(g, false, sb, true));   // g B^H
    if (nb) nb->accumulate(gemm(sa, true, g, false));   // A^H g
  });
  return out;
}

Tensor matvec(const Tensor& W, const Tensor& x) {
  require(W.shape().size() == 2 && x.shape().size() == 1 && W.shape()[1] == x.shape()[0],
          "matvec: shapes " + shape_str(W.shape()) + " and " + shape_str(x.shape()));
  require(W.dtype() == x.dtype(), "matvec: mixed dtypes");
  int64_t m = W.shape()[0], k = W.shape()[1];
  Tensor out = Tensor::zeros({m}, W.dtype());
  if (W.is_complex()) {
    for (int64_t i = 0; i < m; ++i) {
      cplx s{0, 0};
      for (int64_t l = 0; l < k; ++l) s += W.cat(i * k + l) * x.cat(l);
      out.cset(i, s);
    }
  } else {
    for (int64_t i = 0; i < m; ++i) {
      double s = 0;
      for (int64_t l = 0; l < k; ++l) s += W.at(i * k + l) * x.at(l);
      out.set(i, s);
    }
  }
  auto nw = W.node(), nx = x.node();
  Tensor sw = W.detached(), sx = x.detached();
  record(out, {W, x}, sw.buffer_len() + sx.buffer_len(), [nw, nx, sw, sx, m, k](const Tensor& g) {
    bool cx = sw.is_complex();
    if (nw) {
      Tensor gw = Tensor::zeros({m, k}, sw.dtype());
      for (int64_t i = 0; i < m; ++i)
        for (int64_t l = 0; l < k; ++l) {
          if (cx)
            gw.cset(i * k + l, g.cat(i) * std::conj(sx.cat(l)));
          else
            gw.set(i * k + l, g.at(i) * sx.at(l));
        }
      nw->accumulate(gw);
    }
    if (nx) {
      Tensor gx = Tensor::zeros({k}, sx.dtype());
      for (int64_t l = 0; l < k; ++l) {
        if (cx) {
          cplx s{0, 0};
          for (int64_t i = 0; i < m; ++i) s += std::conj(sw.cat(i * k + l)) * g.cat(i);
          gx.cset(l, s);
        } else {
          double s = 0;
          for (int64_t i = 0; i < m; ++i) s += sw.at(i * k + l) * g.at(i);
          gx.set(l, s);
        }
      }
      nx->accumulate(gx);
    }
  });
  return out;
}

Tensor concat_ch(const Tensor& a, const Tensor& b) {
  require(a.shape().size() == b.shape().size() && a.dtype() == b.dtype(),
          "concat: rank/dtype mismatch");
  for (size_t d = 1; d < a.shape().size(); ++d)
    require(a.shape()[d] == b.shape()[d], "concat: trailing dims differ, " +
                                              shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  Shape os = a.shape();
  os[0] += b.shape()[0];
  Tensor out = Tensor::zeros(os, a.dtype());
  std::memcpy(out.mutable_data(), a.data(), sizeof(double) * a.buffer_len());
  std::memcpy(out.mutable_data() + a.buffer_len(), b.data(), sizeof(double) * b.buffer_len());
  auto na = a.node(), nb = b.node();
  Shape sha = a.shape(), shb = b.shape();
  record(out, {a, b}, 0, [na, nb, sha, shb](const Tensor& g) {
    int64_t la = numel_of(sha) * per_elem(g.dtype());
    if (na) {
      Tensor ga = Tensor::zeros(sha, g.dtype());
      std::memcpy(ga.mutable_data(), g.data(), sizeof(double) * la);
      na->accumulate(ga);
    }
    if (nb) {
      Tensor gb = Tensor::zeros(shb, g.dtype());
      std::memcpy(gb.mutable_data(), g.data() + la, sizeof(double) * gb.buffer_len());
      nb->accumulate(gb);
    }
  });
  return out;
}

Tensor slice_ch(const Tensor& a, int64_t c0, int64_t c1) {
  require(0 <= c0 && c0 < c1 && c1 <= a.shape()[0],
          "slice_ch: range [" + std::to_string(c0) + "," + std::to_string(c1) + ") of " +
              std::to_string(a.shape()[0]) + " channels");
  Shape os = a.shape();
  os[0] = c1 - c0;
  int64_t stride = a.buffer_len() / a.shape()[0];
  Tensor out = Tensor::zeros(os, a.dtype());
  std::memcpy(out.mutable_data(), a.data() + c0 * stride, sizeof(double) * out.buffer_len());
  auto na = a.node();
  Shape sha = a.shape();
  record(out, {a}, 0, [na, sha, c0, stride](const Tensor& g) {
    if (!na) return;
    Tensor ga = Tensor::zeros(sha, g.dtype());
    std::memcpy(ga.mutable_data() + c0 * stride, g.data(), sizeof(double) * g.buffer_len());
    na->accumulate(ga);
  });
  return out;
}

namespace {

int64_t reflect_index(int64_t q, int64_t n) {
  // mirror without repeating the border sample
  while (q < 0 || q >= n) {
    if (q < 0) q = -q;
    if (q >= n) q = 2 * n - 2 - q;
  }
  return q;
}

}  // namespace

Tensor pad_spatial(const Tensor& x, const Shape& lo, const Shape& hi, bool reflect) {
  size_t nsp = x.shape().size() - 1;
  require(lo.size() == nsp && hi.size() == nsp, "pad: lo/hi rank mismatch");
  Shape os = x.shape();
  Shape in_sp(x.shape().begin() + 1, x.shape().end());
  for (size_t d = 0; d < nsp; ++d) os[d + 1] += lo[d] + hi[d];
  Shape out_sp(os.begin() + 1, os.end());
  int64_t C = x.shape()[0];
  int pe = per_elem(x.dtype());
  int64_t Si = numel_of(in_sp), So = numel_of(out_sp);
  Tensor out = Tensor::zeros(os, x.dtype());
  const double* px = x.data();
  double* po = out.mutable_data();
  std::vector<int64_t> coord(nsp);
  for (int64_t c = 0; c < C; ++c) {
    for (int64_t so = 0; so < So; ++so) {
      int64_t tmp = so;
      for (size_t d = nsp; d-- > 0;) {
        coord[d] = tmp % out_sp[d];
        tmp /= out_sp[d];
      }
      bool inside = true;
      int64_t si = 0;
      for (size_t d = 0; d < nsp; ++d) {
        int64_t q = coord[d] - lo[d];
        if (q < 0 || q >= in_sp[d]) {
          if (!reflect) {
            inside = false;
            break;
          }
          q = reflect_index(q, in_sp[d]);
        }
        si = si * in_sp[d] + q;
      }
      if (!inside) continue;
      for (int p = 0; p < pe; ++p) po[(c * So + so) * pe + p] = px[(c * Si + si) * pe + p];
    }
  }
  auto nx = x.node();
  Shape shx = x.shape();
  record(out, {x}, 0, [nx, shx, lo, in_sp, out_sp, reflect, C, pe](const Tensor& g) {
    if (!nx) return;
    size_t nsp = in_sp.size();
    int64_t Si = numel_of(in_sp), So = numel_of(out_sp);
    Tensor gx = Tensor::zeros(shx, g.dtype());
    const double* pg = g.data();
    double* po = gx.mutable_data();
    std::vector<int64_t> coord(nsp);
    for (int64_t c = 0; c < C; ++c) {
      for (int64_t so = 0; so < So; ++so) {
        int64_t tmp = so;
        for (size_t d = nsp; d-- > 0;) {
          coord[d] = tmp % out_sp[d];
          tmp /= out_sp[d];
        }
        bool inside = true;
        int64_t si = 0;
        for (size_t d = 0; d < nsp; ++d) {
          int64_t q = coord[d] - lo[d];
          if (q < 0 || q >= in_sp[d]) {
            if (!reflect) {
              inside = false;
              break;
            }
            q = reflect_index(q, in_sp[d]);
          }
          si = si * in_sp[d] + q;
        }
        if (!inside) continue;
        for (int p = 0; p < pe; ++p) po[(c * Si + si) * pe + p] += pg[(c * So + so) * pe + p];
      }
    }
    nx->accumulate(gx);
  });
  return out;
}

Tensor crop_spatial(const Tensor& x, const Shape& lo, const Shape& size) {
  size_t nsp = x.shape().size() - 1;
  require(lo.size() == nsp && size.size() == nsp, "crop: lo/size rank mismatch");
  Shape in_sp(x.shape().begin() + 1, x.shape().end());
  for (size_t d = 0; d < nsp; ++d)
    require(lo[d] >= 0 && lo[d] + size[d] <= in_sp[d],
            "crop: window exceeds input at dim " + std::to_string(d));
  Shape os = x.shape();
  for (size_t d = 0; d < nsp; ++d) os[d + 1] = size[d];
  int64_t C = x.shape()[0];
  int pe = per_elem(x.dtype());
  int64_t Si = numel_of(in_sp), So = numel_of(size);
  Tensor out = Tensor::zeros(os, x.dtype());
  const double* px = x.data();
  double* po = out.mutable_data();
  std::vector<int64_t> coord(nsp);
  for (int64_t c = 0; c < C; ++c)
    for (int64_t so = 0; so < So; ++so) {
      int64_t tmp = so;
      for (size_t d = nsp; d-- > 0;) {
        coord[d] = tmp % size[d];
        tmp /= size[d];
      }
      int64_t si = 0;
      for (size_t d = 0; d < nsp; ++d) si = si * in_sp[d] + coord[d] + lo[d];
      for (int p = 0; p < pe; ++p) po[(c * So + so) * pe + p] = px[(c * Si + si) * pe + p];
    }
  auto nx = x.node();
  Shape shx = x.shape();
  record(out, {x}, 0, [nx, shx, lo, in_sp, size, C, pe](const Tensor& g) {
    if (!nx) return;
    size_t nsp = in_sp.size();
    int64_t Si = numel_of(in_sp), So = numel_of(size);
    Tensor gx = Tensor::zeros(shx, g.dtype());
    const double* pg = g.data();
    double* po = gx.mutable_data();
    std::vector<int64_t> coord(nsp);
    for (int64_t c = 0; c < C; ++c)
      for (int64_t so = 0; so < So; ++so) {
        int64_t tmp = so;
        for (size_t d = nsp; d-- > 0;) {
          coord[d] = tmp % size[d];
          tmp /= size[d];
        }
        int64_t si = 0;
        for (size_t d = 0; d < nsp; ++d) si = si * in_sp[d] + coord[d] + lo[d];
        for (int p = 0; p < pe; ++p) po[(c * Si + si) * pe + p] += pg[(c * So + so) * pe + p];
      }
    nx->accumulate(gx);
  });
  return out;
}

Tensor gather_rows(const Tensor& x, const std::vector<int64_t>& idx) {
  int64_t N = x.shape()[0];
  int64_t stride = x.buffer_len() / N;
  for (int64_t i : idx)
    require(0 <= i && i < N, "gather: index " + std::to_string(i) + " out of [0," +
                                 std::to_string(N) + ")");
  Shape os = x.shape();
  os[0] = static_cast<int64_t>(idx.size());
  Tensor out = Tensor::zeros(os, x.dtype());
  for (size_t r = 0; r < idx.size(); ++r)
    std::memcpy(out.mutable_data() + r * stride, x.data() + idx[r] * stride,
                sizeof(double) * stride);
  auto nx = x.node();
  Shape shx = x.shape();
  record(out, {x}, 0, [nx, shx, idx, stride](const Tensor& g) {
    if (!nx) return;
    Tensor gx = Tensor::zeros(shx, g.dtype());
    double* po = gx.mutable_data();
    const double* pg = g.data();
    for (size_t r = 0; r < idx.size(); ++r)
      for (int64_t j = 0; j < stride; ++j) po[idx[r] * stride + j] += pg[r * stride + j];
    nx->accumulate(gx);
  });
  return out;
}

Tensor scatter_rows(const Tensor& x, const std::vector<int64_t>& idx, int64_t n_rows) {
  require(static_cast<int64_t>(idx.size()) == x.shape()[0],
          "scatter: index count != row count");
  int64_t stride = x.buffer_len() / x.shape()[0];
  for (int64_t i : idx)
    require(0 <= i && i < n_rows, "scatter: index " + std::to_string(i) + " out of [0," +
                                      std::to_string(n_rows) + ")");
  Shape os = x.shape();
  os[0] = n_rows;
  Tensor out = Tensor::zeros(os, x.dtype());
  double* po = out.mutable_data();
  const double* px = x.data();
  for (size_t r = 0; r < idx.size(); ++r)
    for (int64_t j = 0; j < stride; ++j) po[idx[r] * stride + j] += px[r * stride + j];
  auto nx = x.node();
  Shape shx = x.shape();
  record(out, {x}, 0, [nx, shx, idx, stride](const Tensor& g) {
    if (!nx) return;
    Tensor gx = Tensor::zeros(shx, g.dtype());
    double* po = gx.mutable_data();
    const double* pg = g.data();
    for (size_t r = 0; r < idx.size(); ++r)
      std::memcpy(po + r * stride, pg + idx[r] * stride, sizeof(double) * stride);
    nx->accumulate(gx);
  });
  return out;
}

namespace {

void up2_fwd(const double* in, double* out, int64_t C, const Shape& sp, int pe) {
  size_t r = sp.size();
  Shape osp = sp;
  for (auto& d : osp) d *= 2;
  int64_t Si = numel_of(sp), So = numel_of(osp);
  std::vector<int64_t> coord(r);
  for (int64_t c = 0; c < C; ++c)
    for (int64_t so = 0; so < So; ++so) {
      int64_t tmp = so;
      for (size_t d = r; d-- > 0;) {
        coord[d] = (tmp % osp[d]) / 2;
        tmp /= osp[d];
      }
      int64_t si = 0;
      for (size_t d = 0; d < r; ++d) si = si * sp[d] + coord[d];
      for (int p = 0; p < pe; ++p) out[(c * So + so) * pe + p] = in[(c * Si + si) * pe + p];
    }
}

void up2_adj(const double* gout, double* gin, int64_t C, const Shape& sp, int pe) {
  size_t r = sp.size();
  Shape osp = sp;
  for (auto& d : osp) d *= 2;
  int64_t Si = numel_of(sp), So = numel_of(osp);
  std::vector<int64_t> coord(r);
  for (int64_t c = 0; c < C; ++c)
    for (int64_t so = 0; so < So; ++so) {
      int64_t tmp = so;
      for (size_t d = r; d-- > 0;) {
        coord[d] = (tmp % osp[d]) / 2;
        tmp /= osp[d];
      }
      int64_t si = 0;
      for (size_t d = 0; d < r; ++d) si = si * sp[d] + coord[d];
      for (int p = 0; p < pe; ++p) gin[(c * Si + si) * pe + p] += gout[(c * So + so) * pe + p];
    }
}

}  // namespace

Tensor upsample2(const Tensor& x) {
  Shape sp(x.shape().begin() + 1, x.shape().end());
  Shape os = x.shape();
  for (size_t d = 1; d < os.size(); ++d) os[d] *= 2;
  Tensor out = Tensor::zeros(os, x.dtype());
  up2_fwd(x.data(), out.mutable_data(), x.shape()[0], sp, per_elem(x.dtype()));
  auto nx = x.node();
  Shape shx = x.shape();
  record(out, {x}, 0, [nx, shx, sp](const Tensor& g) {
    if (!nx) return;
    Tensor gx = Tensor::zeros(shx, g.dtype());
    up2_adj(g.data(), gx.mutable_data(), shx[0], sp, per_elem(g.dtype()));
    nx->accumulate(gx);
  });
  return out;
}

Tensor downsample2(const Tensor& x) {
  Shape sp(x.shape().begin() + 1, x.shape().end());
  for (int64_t d : sp) require(d % 2 == 0, "downsample2: odd spatial dim " + std::to_string(d));
  Shape os = x.shape();
  for (size_t d = 1; d < os.size(); ++d) os[d] /= 2;
  Shape osp(os.begin() + 1, os.end());
  int64_t C = x.shape()[0];
  int pe = per_elem(x.dtype());
  size_t r = sp.size();
  int64_t cells = int64_t(1) << r;
  double inv = 1.0 / static_cast<double>(cells);
  int64_t Si = numel_of(sp), So = numel_of(osp);
  Tensor out = Tensor::zeros(os, x.dtype());
  const double* px = x.data();
  double* po = out.mutable_data();
  std::vector<int64_t> coord(r);
  for (int64_t c = 0; c < C; ++c)
    for (int64_t so = 0; so < So; ++so) {
      int64_t tmp = so;
      for (size_t d = r; d-- > 0;) {
        coord[d] = tmp % osp[d];
        tmp /= osp[d];
      }
      for (int p = 0; p < pe; ++p) {
        double s = 0.0;
        for (int64_t cell = 0; cell < cells; ++cell) {
          int64_t si = 0;
          for (size_t d = 0; d < r; ++d) si = si * sp[d] + coord[d] * 2 + ((cell >> d) & 1);
          s += px[(c * Si + si) * pe + p];
        }
        po[(c * So + so) * pe + p] = s * inv;
      }
    }
  auto nx = x.node();
  Shape shx = x.shape();
  record(out, {x}, 0, [nx, shx, sp, osp, C, pe, r, cells, inv](const Tensor& g) {
    if (!nx) return;
    int64_t Si = numel_of(sp), So = numel_of(osp);
    Tensor gx = Tensor::zeros(shx, g.dtype());
    const double* pg = g.data();
    double* po = gx.mutable_data();
    std::vector<int64_t> coord(r);
    for (int64_t c = 0; c < C; ++c)
      for (int64_t so = 0; so < So; ++so) {
        int64_t tmp = so;
        for (size_t d = r; d-- > 0;) {
          coord[d] = tmp % osp[d];
          tmp /= osp[d];
        }
        for (int p = 0; p < pe; ++p) {
          double gv = pg[(c * So + so) * pe + p] * inv;
          for (int64_t cell = 0; cell < cells; ++cell) {
            int64_t si = 0;
            for (size_t d = 0; d < r; ++d) si = si * sp[d] + coord[d] * 2 + ((cell >> d) & 1);
            po[(c * Si + si) * pe + p] += gv;
          }
        }
      }
    nx->accumulate(gx);
  });
  return out;
}

Tensor c2ch(const Tensor& z) {
  require(z.is_complex(), "c2ch: expects complex input");
  Shape os = z.shape();
  os[0] *= 2;
  int64_t k = z.shape()[0], S = spatial_of(z);
  Tensor out = Tensor::zeros(os, DType::Real64);
  const double* pz = z.data();
  double* po = out.mutable_data();
  for (int64_t j = 0; j < k; ++j)
    for (int64_t s = 0; s < S; ++s) {
      po[(2 * j) * S + s] = pz[2 * (j * S + s)];
      po[(2 * j + 1) * S + s] = pz[2 * (j * S + s) + 1];
    }
  auto nz = z.node();
  Shape shz = z.shape();
  record(out, {z}, 0, [nz, shz, k, S](const Tensor& g) {
    if (!nz) return;
    Tensor gz = Tensor::zeros(shz, DType::Complex128);
    const double* pg = g.data();
    double* po = gz.mutable_data();
    for (int64_t j = 0; j < k; ++j)
      for (int64_t s = 0; s < S; ++s) {
        po[2 * (j * S + s)] = pg[(2 * j) * S + s];
        po[2 * (j * S + s) + 1] = pg[(2 * j + 1) * S + s];
      }
    nz->accumulate(gz);
  });
  return out;
}

Tensor ch2c(const Tensor& x) {
  require(!x.is_complex() && x.shape()[0] % 2 == 0, "ch2c: expects real input with even channels");
  Shape os = x.shape();
  os[0] /= 2;
  int64_t k = os[0], S = spatial_of(x);
  Tensor out = Tensor::zeros(os, DType::Complex128);
  const double* px = x.data();
  double* po = out.mutable_data();
  for (int64_t j = 0; j < k; ++j)
    for (int64_t s = 0; s < S; ++s) {
      po[2 * (j * S + s)] = px[(2 * j) * S + s];
      po[2 * (j * S + s) + 1] = px[(2 * j + 1) * S + s];
    }
  auto nx = x.node();
  Shape shx = x.shape();
  record(out, {x}, 0, [nx, shx, k, S](const Tensor& g) {
    if (!nx) return;
    Tensor gx = Tensor::zeros(shx, DType::Real64);
    const double* pg = g.data();
    double* po = gx.mutable_data();
    for (int64_t j = 0; j < k; ++j)
      for (int64_t s = 0; s < S; ++s) {
        po[(2 * j) * S + s] = pg[2 * (j * S + s)];
        po[(2 * j + 1) * S + s] = pg[2 * (j * S + s) + 1];
      }
    nx->accumulate(gx);
  });
  return out;
}

Tensor fftc(const Tensor& z, const std::vector<int>& axes, bool fwd) {
  require(z.is_complex(), "fft: expects complex input");
  for (int ax : axes)
    require(ax >= 0 && ax < static_cast<int>(z.shape().size()),
            "fft: axis " + std::to_string(ax) + " out of range for " + shape_str(z.shape()));
  Tensor out = z.detached();
  double norm = 1.0;
  for (int ax : axes) {
    fft::dft_axis(out.mutable_data(), out.shape(), ax, fwd ? -1 : +1);
    norm *= static_cast<double>(z.shape()[ax]);
  }
  double s = 1.0 / std::sqrt(norm);
  double* po = out.mutable_data();
  for (int64_t i = 0; i < out.buffer_len(); ++i) po[i] *= s;
  auto nz = z.node();
  Shape shz = z.shape();
  record(out, {z}, 0, [nz, axes, fwd, shz](const Tensor& g) {
    if (!nz) return;
    Tensor gz = g.detached();
    double norm = 1.0;
    for (int ax : axes) {
      fft::dft_axis(gz.mutable_data(), shz, ax, fwd ? +1 : -1);
      norm *= static_cast<double>(shz[ax]);
    }
    double s = 1.0 / std::sqrt(norm);
    double* po = gz.mutable_data();
    for (int64_t i = 0; i < gz.buffer_len(); ++i) po[i] *= s;
    nz->accumulate(gz);
  });
  return out;
}

Tensor linear_op(const Tensor& x, std::shared_ptr<const LinearMap> map) {
  Tensor out;
  {
    ad::NoGradGuard ng;
    out = map->forward(x).detached();
  }
  auto nx = x.node();
  record(out, {x}, 0, [nx, map](const Tensor& g) {
    if (!nx) return;
    nx->accumulate(map->adjoint(g));
  });
  return out;
}

Tensor detach(const Tensor& x) { return x.detached(); }

}  // namespace mrf::ops

// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <memory>

#include "mrfrecon/autodiff.hpp"
#include "mrfrecon/tensor.hpp"

namespace mrf {

// Fixed linear operator usable inside recorded graphs; backward applies the
// Hermitian adjoint. Implementations must be pure and thread-safe.
struct LinearMap {
  virtual ~LinearMap() = default;
  virtual Tensor forward(const Tensor& x) const = 0;
  virtual Tensor adjoint(const Tensor& y) const = 0;
};

namespace ops {

// ---- elementwise ----
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);  // complex-aware
Tensor div(const Tensor& a, const Tensor& b);  // real
Tensor neg(const Tensor& a);
Tensor scale(const Tensor& a, double s);
Tensor cscale(const Tensor& a, cplx s);  // complex tensor
Tensor add_scalar(const Tensor& a, double s);
Tensor exp(const Tensor& a);
Tensor sqrt(const Tensor& a);
Tensor pow_const(const Tensor& a, double p);  // positive base
Tensor relu(const Tensor& a);
Tensor abs_real(const Tensor& a);
Tensor silu(const Tensor& a);
Tensor sigmoid(const Tensor& a);
Tensor cmod(const Tensor& z);  // complex modulus -> real

// out = s * x with s a real scalar tensor (learnable step size)
Tensor scale_by(const Tensor& x, const Tensor& s);

// x: [C, spatial...], m: [spatial...] constant mask/weight (no grad to m)
Tensor mul_spatial(const Tensor& x, const Tensor& m);

// ---- reductions ----
Tensor sum(const Tensor& a);         // real
Tensor mean(const Tensor& a);        // real
Tensor sum_sqmod(const Tensor& a);   // sum |a_i|^2 -> real scalar
Tensor global_mean(const Tensor& x);  // [C, spatial...] -> [C]

// ---- linear algebra ----
Tensor matmul(const Tensor& A, const Tensor& B);   // [m,k]x[k,n]
Tensor matvec(const Tensor& W, const Tensor& x);   // [m,k]x[k] -> [m]

// ---- structure ----
Tensor concat_ch(const Tensor& a, const Tensor& b);
Tensor slice_ch(const Tensor& a, int64_t c0, int64_t c1);
Tensor pad_spatial(const Tensor& x, const Shape& lo, const Shape& hi, bool reflect);
Tensor crop_spatial(const Tensor& x, const Shape& lo, const Shape& size);
Tensor gather_rows(const Tensor& x, const std::vector<int64_t>& idx);
Tensor scatter_rows(const Tensor& x, const std::vector<int64_t>& idx, int64_t n_rows);
Tensor upsample2(const Tensor& x);    // nearest, spatial dims after dim 0
Tensor downsample2(const Tensor& x);  // 2x average pool

// ---- complex/real views ----
Tensor c2ch(const Tensor& z);  // [k,...] complex -> [2k,...] real (re,im interleaved)
Tensor ch2c(const Tensor& x);  // inverse

// ---- neural network ----
// x [Ci, spatial...], w [Co, Ci, K..]; same (zero) padding when same=true,
// valid otherwise; odd K.
Tensor conv3d(const Tensor& x, const Tensor& w, const Tensor& bias, bool same = true);
Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor& bias, bool same = true);
Tensor group_norm(const Tensor& x, int64_t groups, const Tensor& gamma, const Tensor& beta,
                  double eps = 1e-5);
Tensor film(const Tensor& x, const Tensor& gamma, const Tensor& beta);  // (1+g)x+b per channel
Tensor chan_scale(const Tensor& x, const Tensor& s);                    // per-channel gate

// ---- FFT ----
// Unitary DFT along the listed axes; fwd=false applies the inverse.
Tensor fftc(const Tensor& z, const std::vector<int>& axes, bool fwd);

// ---- fixed linear operator ----
Tensor linear_op(const Tensor& x, std::shared_ptr<const LinearMap> map);

Tensor detach(const Tensor& x);

}  // namespace ops
}  // namespace mrf

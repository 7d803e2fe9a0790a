// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <functional>

#include "mrfrecon/ops.hpp"
#include "mrfrecon/rng.hpp"

namespace testutil {

using mrf::cplx;
using mrf::DType;
using mrf::Shape;
using mrf::Tensor;

inline Tensor random_tensor(mrf::Rng& rng, Shape shape, DType dt = DType::Real64,
                            double scale = 1.0) {
  Tensor t = Tensor::zeros(std::move(shape), dt);
  double* p = t.mutable_data();
  for (int64_t i = 0; i < t.buffer_len(); ++i) p[i] = scale * rng.normal();
  return t;
}

inline double rel_err(double got, double want) {
  double den = std::max(std::abs(want), 1e-300);
  return std::abs(got - want) / den;
}

inline double max_rel_diff(const Tensor& a, const Tensor& b) {
  double m = 0.0, scale = 0.0;
  for (int64_t i = 0; i < a.buffer_len(); ++i) scale = std::max(scale, std::abs(b.at(i)));
  if (scale == 0.0) scale = 1.0;
  for (int64_t i = 0; i < a.buffer_len(); ++i)
    m = std::max(m, std::abs(a.at(i) - b.at(i)) / scale);
  return m;
}

inline double norm2(const Tensor& a) {
  double s = 0.0;
  const double* p = a.data();
  for (int64_t i = 0; i < a.buffer_len(); ++i) s += p[i] * p[i];
  return std::sqrt(s);
}

inline double rel_norm_diff(const Tensor& a, const Tensor& b) {
  double num = 0.0, den = 0.0;
  for (int64_t i = 0; i < a.buffer_len(); ++i) {
    double d = a.at(i) - b.at(i);
    num += d * d;
    den += b.at(i) * b.at(i);
  }
  return std::sqrt(num) / std::max(std::sqrt(den), 1e-300);
}

// complex inner product <a, b> = sum conj(a_i) b_i over the raw buffers
inline cplx cdot(const Tensor& a, const Tensor& b) {
  cplx s{0.0, 0.0};
  if (a.is_complex()) {
    for (int64_t i = 0; i < a.numel(); ++i) s += std::conj(a.cat(i)) * b.cat(i);
  } else {
    for (int64_t i = 0; i < a.numel(); ++i) s += a.at(i) * b.at(i);
  }
  return s;
}

// Central finite differences on every entry (or a sampled subset) of `leaf`,
// compared against the autodiff gradient already stored on the leaf.
// `f` must evaluate the scalar loss from scratch.
inline double max_fd_rel_err(const std::function<double()>& f, Tensor leaf, const Tensor& adgrad,
                             double step = 1e-5, int max_probe = -1, uint64_t probe_seed = 7) {
  mrf::Rng rng(probe_seed);
  std::vector<int64_t> idx;
  for (int64_t i = 0; i < leaf.buffer_len(); ++i) idx.push_back(i);
  if (max_probe > 0 && static_cast<int64_t>(idx.size()) > max_probe) {
    std::vector<int64_t> pick;
    auto perm = rng.permutation(static_cast<int64_t>(idx.size()));
    for (int i = 0; i < max_probe; ++i) pick.push_back(idx[perm[i]]);
    idx = pick;
  }
  double worst = 0.0;
  double* p = leaf.mutable_data();
  for (int64_t i : idx) {
    double keep = p[i];
    p[i] = keep + step;
    double fp = f();
    p[i] = keep - step;
    double fm = f();
    p[i] = keep;
    double fd = (fp - fm) / (2.0 * step);
    double ad = adgrad.defined() ? adgrad.at(i) : 0.0;
    double den = std::max({std::abs(fd), std::abs(ad), 1e-6});
    worst = std::max(worst, std::abs(fd - ad) / den);
  }
  return worst;
}

}  // namespace testutil

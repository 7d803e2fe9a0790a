// SPDX-License-Identifier: Apache-2.0
#include "doctest.h"
#include "mrfrecon/ops.hpp"
#include "mrfrecon/rng.hpp"
#include "support/test_util.hpp"

using namespace mrf;
using namespace testutil;

namespace {

// adjoint consistency <L x, y> == <x, L^H y> for a linear op given as a
// forward/adjoint lambda pair
void check_adjoint(const std::function<Tensor(const Tensor&)>& fwd,
                   const std::function<Tensor(const Tensor&)>& adj, const Shape& in_shape,
                   const Shape& out_shape, DType dt, uint64_t seed, double tol = 1e-10) {
  Rng rng(seed);
  for (int trial = 0; trial < 5; ++trial) {
    Tensor x = random_tensor(rng, in_shape, dt);
    Tensor y = random_tensor(rng, out_shape, dt);
    cplx lhs = cdot(fwd(x), y);
    cplx rhs = cdot(x, adj(y));
    double den = std::max(std::abs(lhs), 1e-12);
    CHECK(std::abs(lhs - rhs) / den < tol);
  }
}

}  // namespace

TEST_SUITE("tensor-ops") {

TEST_CASE("add identity and shape rejection") {
  Rng rng(1);
  Tensor x = random_tensor(rng, {3, 4});
  Tensor z = Tensor::zeros({3, 4});
  Tensor y = ops::add(x, z);
  CHECK(max_rel_diff(y, x) == 0.0);

  Tensor bad = Tensor::zeros({3, 5});
  CHECK_THROWS_WITH_AS(ops::add(x, bad), doctest::Contains("[3x4]"), std::invalid_argument);
}

TEST_CASE("complex mul matches std::complex") {
  Rng rng(2);
  Tensor a = random_tensor(rng, {6}, DType::Complex128);
  Tensor b = random_tensor(rng, {6}, DType::Complex128);
  Tensor c = ops::mul(a, b);
  for (int64_t i = 0; i < 6; ++i) {
    cplx want = a.cat(i) * b.cat(i);
    CHECK(std::abs(c.cat(i) - want) < 1e-14);
  }
}

TEST_CASE("fft round trip and unitarity") {
  Rng rng(3);
  Tensor x = random_tensor(rng, {4, 6, 8}, DType::Complex128);
  Tensor k = ops::fftc(x, {0, 1, 2}, true);
  Tensor back = ops::fftc(k, {0, 1, 2}, false);
  CHECK(rel_norm_diff(back, x) < 1e-12);
  CHECK(rel_err(norm2(k), norm2(x)) < 1e-12);

  // single-axis unitarity as well
  Tensor k1 = ops::fftc(x, {1}, true);
  CHECK(rel_err(norm2(k1), norm2(x)) < 1e-12);
}

TEST_CASE("conv3d identity kernel") {
  Rng rng(4);
  Tensor x = random_tensor(rng, {2, 5, 6, 7});
  Tensor w = Tensor::zeros({2, 2, 3, 3, 3});
  // delta at the center tap of each matching channel pair
  for (int64_t c = 0; c < 2; ++c) w.set((((c * 2 + c) * 3 + 1) * 3 + 1) * 3 + 1, 1.0);
  Tensor y = ops::conv3d(x, w, {});
  CHECK(max_rel_diff(y, x) < 1e-15);
}

TEST_CASE("conv3d rejects mismatched channels") {
  Tensor x = Tensor::zeros({3, 4, 4, 4});
  Tensor w = Tensor::zeros({2, 4, 3, 3, 3});
  CHECK_THROWS_WITH_AS(ops::conv3d(x, w, {}), doctest::Contains("input channels"),
                       std::invalid_argument);
}

TEST_CASE("adjoint consistency of linear ops") {
  // complex elementwise scale
  check_adjoint([](const Tensor& x) { return ops::cscale(x, {1.3, -0.4}); },
                [](const Tensor& y) { return ops::cscale(y, {1.3, 0.4}); }, {10}, {10},
                DType::Complex128, 11);
  // fft
  check_adjoint([](const Tensor& x) { return ops::fftc(x, {0, 1}, true); },
                [](const Tensor& y) { return ops::fftc(y, {0, 1}, false); }, {6, 8}, {6, 8},
                DType::Complex128, 12);
  // zero pad <-> crop
  Shape lo{1, 2, 0}, hi{2, 0, 3};
  check_adjoint(
      [&](const Tensor& x) { return ops::pad_spatial(x, lo, hi, false); },
      [&](const Tensor& y) { return ops::crop_spatial(y, lo, {4, 5, 6}); }, {2, 4, 5, 6},
      {2, 7, 5, 9}, DType::Complex128, 13);
  // gather <-> scatter
  std::vector<int64_t> idx{3, 1, 3, 0};
  check_adjoint([&](const Tensor& x) { return ops::gather_rows(x, idx); },
                [&](const Tensor& y) { return ops::scatter_rows(y, idx, 5); }, {5, 3}, {4, 3},
                DType::Complex128, 14);
  // downsample <-> (scaled) upsample: D^H = U / 2^r
  check_adjoint([](const Tensor& x) { return ops::downsample2(x); },
                [](const Tensor& y) { return ops::scale(ops::upsample2(y), 1.0 / 8.0); },
                {2, 4, 4, 4}, {2, 2, 2, 2}, DType::Real64, 15);
  // matmul by fixed matrix
  Rng rng(16);
  Tensor M = random_tensor(rng, {5, 7}, DType::Complex128);
  Tensor Mh = Tensor::zeros({7, 5}, DType::Complex128);
  for (int64_t i = 0; i < 5; ++i)
    for (int64_t j = 0; j < 7; ++j) Mh.cset(j * 5 + i, std::conj(M.cat(i * 7 + j)));
  check_adjoint([&](const Tensor& x) { return ops::matvec(M, x); },
                [&](const Tensor& y) { return ops::matvec(Mh, y); }, {7}, {5},
                DType::Complex128, 17);
  // reflect pad adjoint (fold-back)
  check_adjoint(
      [&](const Tensor& x) { return ops::pad_spatial(x, {2, 1}, {1, 2}, true); },
      [&](const Tensor& y) {
        // adjoint computed through autodiff of the forward op
        Tensor x0 = Tensor::zeros({1, 5, 4});
        x0.set_requires_grad(true);
        ad::Tape tape;
        Tensor p = ops::pad_spatial(x0, {2, 1}, {1, 2}, true);
        tape.backward_seeded(p, y);
        return x0.grad();
      },
      {1, 5, 4}, {1, 8, 7}, DType::Real64, 18, 1e-12);
}

TEST_CASE("c2ch/ch2c round trip") {
  Rng rng(21);
  Tensor z = random_tensor(rng, {3, 4, 4}, DType::Complex128);
  Tensor ch = ops::c2ch(z);
  CHECK(ch.shape() == Shape{6, 4, 4});
  Tensor z2 = ops::ch2c(ch);
  CHECK(rel_norm_diff(z2, z) == 0.0);
}

TEST_CASE("group_norm normalizes groups") {
  Rng rng(22);
  Tensor x = random_tensor(rng, {8, 6, 6}, DType::Real64, 3.0);
  Tensor gamma = Tensor::zeros({8});
  Tensor beta = Tensor::zeros({8});
  for (int64_t c = 0; c < 8; ++c) gamma.set(c, 1.0);
  Tensor y = ops::group_norm(x, 4, gamma, beta);
  // each group of 2 channels has ~zero mean, ~unit variance
  for (int g = 0; g < 4; ++g) {
    double mu = 0, var = 0;
    int64_t n = 2 * 36;
    for (int64_t i = 0; i < n; ++i) mu += y.at(g * n + i);
    mu /= n;
    for (int64_t i = 0; i < n; ++i) var += (y.at(g * n + i) - mu) * (y.at(g * n + i) - mu);
    var /= n;
    CHECK(std::abs(mu) < 1e-12);
    CHECK(std::abs(var - 1.0) < 1e-4);  // eps bias only
  }
}

TEST_CASE("silu/sigmoid sanity") {
  Tensor x = Tensor::from_real({3}, {-1.0, 0.0, 2.0});
  Tensor s = ops::sigmoid(x);
  CHECK(s.at(1) == doctest::Approx(0.5));
  Tensor y = ops::silu(x);
  CHECK(y.at(2) == doctest::Approx(2.0 / (1.0 + std::exp(-2.0))));
}

}  // TEST_SUITE

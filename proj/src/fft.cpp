// SPDX-License-Identifier: Apache-2.0
#include "mrfrecon/fft.hpp"

#include <fftw3.h>

#include <map>
#include <mutex>
#include <tuple>
#include <vector>

namespace mrf::fft {

namespace {

std::mutex g_plan_mu;
std::map<std::tuple<int64_t, int64_t, int64_t, int>, fftw_plan> g_plans;

fftw_plan plan_for(int64_t n0, int64_t n1, int64_t n2, int sign) {
  std::lock_guard<std::mutex> lk(g_plan_mu);
  auto key = std::make_tuple(n0, n1, n2, sign);
  auto it = g_plans.find(key);
  if (it != g_plans.end()) return it->second;
  // Dummy buffer for planning; execution uses the new-array interface.
  std::vector<double> scratch(2 * n0 * std::max<int64_t>(n1, 1) * std::max<int64_t>(n2, 1));
  auto* buf = reinterpret_cast<fftw_complex*>(scratch.data());
  fftw_plan p;
  unsigned flags = FFTW_ESTIMATE | FFTW_UNALIGNED;
  if (n2 > 0) {
    p = fftw_plan_dft_3d(static_cast<int>(n0), static_cast<int>(n1), static_cast<int>(n2), buf,
                         buf, sign, flags);
  } else if (n1 > 0) {
    p = fftw_plan_dft_2d(static_cast<int>(n0), static_cast<int>(n1), buf, buf, sign, flags);
  } else {
    p = fftw_plan_dft_1d(static_cast<int>(n0), buf, buf, sign, flags);
  }
  g_plans.emplace(key, p);
  return p;
}

}  // namespace

void dft3(double* data, int64_t n0, int64_t n1, int64_t n2, int sign) {
  fftw_plan p = plan_for(n0, n1, n2, sign);
  auto* buf = reinterpret_cast<fftw_complex*>(data);
  fftw_execute_dft(p, buf, buf);
}

void dft2(double* data, int64_t n0, int64_t n1, int sign) {
  fftw_plan p = plan_for(n0, n1, 0, sign);
  auto* buf = reinterpret_cast<fftw_complex*>(data);
  fftw_execute_dft(p, buf, buf);
}

void dft1(double* data, int64_t n, int sign) {
  fftw_plan p = plan_for(n, 0, 0, sign);
  auto* buf = reinterpret_cast<fftw_complex*>(data);
  fftw_execute_dft(p, buf, buf);
}

void dft_axis(double* data, const Shape& shape, int axis, int sign) {
  int nd = static_cast<int>(shape.size());
  int64_t n = shape[axis];
  int64_t inner = 1, outer = 1;
  for (int d = axis + 1; d < nd; ++d) inner *= shape[d];
  for (int d = 0; d < axis; ++d) outer *= shape[d];

  std::vector<double> line(2 * n);
  for (int64_t o = 0; o < outer; ++o) {
    for (int64_t i = 0; i < inner; ++i) {
      double* base = data + 2 * (o * n * inner + i);
      for (int64_t j = 0; j < n; ++j) {
        line[2 * j] = base[2 * j * inner];
        line[2 * j + 1] = base[2 * j * inner + 1];
      }
      dft1(line.data(), n, sign);
      for (int64_t j = 0; j < n; ++j) {
        base[2 * j * inner] = line[2 * j];
        base[2 * j * inner + 1] = line[2 * j + 1];
      }
    }
  }
}

}  // namespace mrf::fft

// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "mrfrecon/common.hpp"

namespace mrf::fft {

// In-place complex DFT on an interleaved (re,im) buffer, unnormalized,
// sign=-1 forward / +1 inverse. Plans use FFTW_ESTIMATE so planning is
// deterministic and results are reproducible run to run.
void dft3(double* data, int64_t n0, int64_t n1, int64_t n2, int sign);
void dft2(double* data, int64_t n0, int64_t n1, int sign);
void dft1(double* data, int64_t n, int sign);

// 1D transform along `axis` of an N-d interleaved complex buffer.
void dft_axis(double* data, const Shape& shape, int axis, int sign);

}  // namespace mrf::fft

// SPDX-License-Identifier: Apache-2.0
#include "mrfrecon/optim.hpp"

#include <cmath>

namespace mrf {

Adam::Adam(ParamStore& params, AdamConfig cfg) : params_(params), cfg_(cfg) {
  for (const auto& [name, p] : params_.all()) {
    m_[name].assign(p.buffer_len(), 0.0);
    v_[name].assign(p.buffer_len(), 0.0);
  }
}

bool Adam::step() {
  // validate first so an aborted step leaves moments untouched
  for (auto& [name, p] : params_.all()) {
    Tensor g = p.grad();
    if (!g.defined()) continue;
    if (!g.all_finite()) return false;
  }
  ++t_;
  double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
  double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
  for (auto& [name, p] : params_.all()) {
    Tensor g = p.grad();
    if (!g.defined()) continue;
    auto& m = m_[name];
    auto& v = v_[name];
    const double* pg = g.data();
    double* pp = p.mutable_data();
    for (int64_t i = 0; i < p.buffer_len(); ++i) {
      m[i] = cfg_.beta1 * m[i] + (1.0 - cfg_.beta1) * pg[i];
      v[i] = cfg_.beta2 * v[i] + (1.0 - cfg_.beta2) * pg[i] * pg[i];
      double mh = m[i] / bc1;
      double vh = v[i] / bc2;
      pp[i] -= cfg_.lr * mh / (std::sqrt(vh) + cfg_.eps);
    }
  }
  return true;
}

}  // namespace mrf

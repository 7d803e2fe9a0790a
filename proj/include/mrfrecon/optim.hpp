// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <map>
#include <string>

#include "mrfrecon/tensor.hpp"

namespace mrf {

// Named trainable tensors. Iteration order is the sorted name order, which
// keeps updates deterministic.
class ParamStore {
 public:
  Tensor& add(const std::string& name, Tensor t) {
    t.set_requires_grad(true);
    auto [it, fresh] = params_.emplace(name, std::move(t));
    require(fresh, "param '" + name + "' already registered");
    return it->second;
  }
  Tensor& at(const std::string& name) {
    auto it = params_.find(name);
    require(it != params_.end(), "unknown param '" + name + "'");
    return it->second;
  }
  const Tensor& at(const std::string& name) const {
    auto it = params_.find(name);
    require(it != params_.end(), "unknown param '" + name + "'");
    return it->second;
  }
  bool has(const std::string& name) const { return params_.count(name) > 0; }
  std::map<std::string, Tensor>& all() { return params_; }
  const std::map<std::string, Tensor>& all() const { return params_; }
  int64_t count_elems() const {
    int64_t n = 0;
    for (const auto& [k, v] : params_) n += v.numel();
    return n;
  }
  void zero_grads() {
    for (auto& [k, v] : params_) v.zero_grad();
  }

 private:
  std::map<std::string, Tensor> params_;
};

struct AdamConfig {
  double lr = 5e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Standard Adam with bias correction. step() applies the accumulated leaf
// gradients; a step with any non-finite gradient is aborted and reported.
class Adam {
 public:
  Adam(ParamStore& params, AdamConfig cfg = {});

  // returns false (and changes nothing) when a gradient is NaN/Inf
  bool step();
  void set_lr(double lr) { cfg_.lr = lr; }
  double lr() const { return cfg_.lr; }
  int64_t t() const { return t_; }

 private:
  ParamStore& params_;
  AdamConfig cfg_;
  std::map<std::string, std::vector<double>> m_, v_;
  int64_t t_ = 0;
};

// Halve the learning rate when the validation metric has not improved for
// `patience` epochs.
class PlateauScheduler {
 public:
  PlateauScheduler(Adam& opt, int patience = 20, double factor = 0.5)
      : opt_(opt), patience_(patience), factor_(factor) {}

  // call once per validation epoch; returns true when the lr was reduced
  bool observe(double metric) {
    if (metric < best_ - 1e-12) {
      best_ = metric;
      stale_ = 0;
      return false;
    }
    if (++stale_ >= patience_) {
      opt_.set_lr(opt_.lr() * factor_);
      stale_ = 0;
      return true;
    }
    return false;
  }
  double best() const { return best_; }

 private:
  Adam& opt_;
  int patience_;
  double factor_;
  double best_ = 1e300;
  int stale_ = 0;
};

}  // namespace mrf

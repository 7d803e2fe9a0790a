// SPDX-License-Identifier: Apache-2.0
#include "mrfrecon/tensor.hpp"

#include <cmath>

#include "mrfrecon/autodiff.hpp"

namespace mrf {

Tensor Tensor::make(Shape shape, DType dt) {
  Tensor t;
  t.impl_ = std::make_shared<Impl>();
  t.impl_->shape = std::move(shape);
  t.impl_->dtype = dt;
  t.impl_->buf.assign(numel_of(t.impl_->shape) * per_elem(dt), 0.0);
  return t;
}

Tensor Tensor::zeros(Shape shape, DType dt) { return make(std::move(shape), dt); }

Tensor Tensor::scalar(double v, bool requires_grad) {
  Tensor t = make({1}, DType::Real64);
  t.impl_->buf[0] = v;
  if (requires_grad) t.set_requires_grad(true);
  return t;
}

Tensor Tensor::from_real(Shape shape, std::vector<double> vals) {
  require(numel_of(shape) == static_cast<int64_t>(vals.size()),
          "from_real: " + shape_str(shape) + " needs " + std::to_string(numel_of(shape)) +
              " values, got " + std::to_string(vals.size()));
  Tensor t;
  t.impl_ = std::make_shared<Impl>();
  t.impl_->shape = std::move(shape);
  t.impl_->dtype = DType::Real64;
  t.impl_->buf = std::move(vals);
  return t;
}

Tensor Tensor::from_complex(Shape shape, const std::vector<cplx>& vals) {
  require(numel_of(shape) == static_cast<int64_t>(vals.size()),
          "from_complex: " + shape_str(shape) + " needs " + std::to_string(numel_of(shape)) +
              " values, got " + std::to_string(vals.size()));
  Tensor t = make(std::move(shape), DType::Complex128);
  for (size_t i = 0; i < vals.size(); ++i) t.cset(static_cast<int64_t>(i), vals[i]);
  return t;
}

Tensor& Tensor::set_requires_grad(bool b) {
  impl_->requires_grad = b;
  if (b && !impl_->node) {
    impl_->node = ad::make_leaf(impl_->shape, impl_->dtype);
  }
  return *this;
}

Tensor Tensor::grad() const {
  if (!impl_ || !impl_->node) return {};
  return impl_->node->grad_acc;
}

void Tensor::zero_grad() {
  if (impl_ && impl_->node) impl_->node->grad_acc = {};
}

Tensor Tensor::detached() const {
  if (!impl_) return {};
  Tensor t;
  t.impl_ = std::make_shared<Impl>();
  t.impl_->shape = impl_->shape;
  t.impl_->dtype = impl_->dtype;
  t.impl_->buf = impl_->buf;  // copy of values, no node
  return t;
}

Tensor Tensor::clone() const { return detached(); }

bool Tensor::all_finite() const {
  for (double v : impl_->buf)
    if (!std::isfinite(v)) return false;
  return true;
}

}  // namespace mrf

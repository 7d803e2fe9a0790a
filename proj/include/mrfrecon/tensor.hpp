// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <memory>

#include "mrfrecon/common.hpp"

namespace mrf {

enum class DType { Real64, Complex128 };

inline int per_elem(DType dt) { return dt == DType::Complex128 ? 2 : 1; }

namespace ad {
struct Node;
std::shared_ptr<Node> make_leaf(const Shape& shape, DType dtype);
}  // namespace ad

// Dense N-d array. Real64 holds one double per element, Complex128 holds an
// interleaved (re, im) pair. Buffers are treated as immutable once an op has
// consumed the tensor; parameter updates happen between tapes.
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape, DType dt = DType::Real64);
  static Tensor scalar(double v, bool requires_grad = false);
  static Tensor from_real(Shape shape, std::vector<double> vals);
  static Tensor from_complex(Shape shape, const std::vector<cplx>& vals);

  bool defined() const { return impl_ != nullptr; }
  const Shape& shape() const { return impl_->shape; }
  DType dtype() const { return impl_->dtype; }
  bool is_complex() const { return impl_->dtype == DType::Complex128; }
  int64_t numel() const { return numel_of(impl_->shape); }
  int64_t buffer_len() const { return numel() * per_elem(impl_->dtype); }

  const double* data() const { return impl_->buf.data(); }
  // For construction and optimizer updates only; never call on a tensor that
  // is already part of a recorded graph.
  double* mutable_data() { return impl_->buf.data(); }
  const std::vector<double>& buffer() const { return impl_->buf; }

  double at(int64_t i) const { return impl_->buf[i]; }
  cplx cat(int64_t i) const { return {impl_->buf[2 * i], impl_->buf[2 * i + 1]}; }
  void set(int64_t i, double v) { impl_->buf[i] = v; }
  void cset(int64_t i, cplx v) {
    impl_->buf[2 * i] = v.real();
    impl_->buf[2 * i + 1] = v.imag();
  }

  double value() const {  // scalar convenience
    require(numel() == 1 && !is_complex(), "value(): tensor is not a real scalar");
    return impl_->buf[0];
  }

  bool requires_grad() const { return impl_ && impl_->requires_grad; }
  Tensor& set_requires_grad(bool b);

  std::shared_ptr<ad::Node> node() const { return impl_ ? impl_->node : nullptr; }
  void set_node(std::shared_ptr<ad::Node> n) { impl_->node = std::move(n); }

  // Gradient accumulated on a leaf by the last backward pass; undefined
  // tensor when no gradient reached this leaf.
  Tensor grad() const;
  void zero_grad();

  Tensor detached() const;  // same buffer, no graph link
  Tensor clone() const;     // deep copy, no graph link

  bool all_finite() const;

 private:
  struct Impl {
    Shape shape;
    DType dtype = DType::Real64;
    std::vector<double> buf;
    std::shared_ptr<ad::Node> node;
    bool requires_grad = false;
  };
  std::shared_ptr<Impl> impl_;

  static Tensor make(Shape shape, DType dt);
};

}  // namespace mrf

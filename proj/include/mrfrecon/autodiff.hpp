// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <functional>
#include <memory>

#include "mrfrecon/tensor.hpp"

namespace mrf::ad {

// One recorded operation (or leaf). Gradients are accumulated into grad_acc.
// For Complex128 outputs the gradient is stored as a complex tensor whose
// (re, im) parts are the partials of the loss with respect to the (re, im)
// channels of the value; complex-linear ops therefore backpropagate with
// their Hermitian adjoint.
struct Node {
  uint64_t seq = 0;
  bool leaf = false;
  Shape out_shape;
  DType out_dtype = DType::Real64;
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(const Tensor& gout)> backward;
  int64_t saved_elems = 0;  // doubles captured by `backward`
  Tensor grad_acc;

  ~Node();
};

// Saved-activation accounting (single logical autodiff worker per thread).
struct SavedStats {
  int64_t current = 0;
  int64_t peak = 0;
};
SavedStats& saved_stats();
void reset_saved_stats();

bool recording();

class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();

 private:
  bool prev_;
};

class Tape {
 public:
  Tape();
  ~Tape();

  // Reverse sweep from a scalar real loss. Each reachable node is visited
  // exactly once; interior saved values and gradients are released as the
  // sweep passes them. Leaf gradients accumulate (caller zeroes them).
  void backward(const Tensor& loss);

  // Seed an explicit output gradient instead of d(loss)=1 (used by the
  // checkpoint re-execution path).
  void backward_seeded(const Tensor& out, const Tensor& gout);

  int64_t nodes_visited() const { return nodes_visited_; }

 private:
  void sweep(const std::shared_ptr<Node>& root);
  bool prev_recording_ = false;
  int64_t nodes_visited_ = 0;
};

std::shared_ptr<Node> make_leaf(const Shape& shape, DType dtype);

// Attach a recorded op node to `out`. `saved_elems` counts the doubles of
// every value tensor captured by `fn`. No-op when recording is off or no
// input carries a node.
void record(Tensor& out, const std::vector<Tensor>& inputs, int64_t saved_elems,
            std::function<void(const Tensor& gout)> fn);

// Run `segment` without storing its interior; recompute during backward.
// The segment must be a pure function of its inputs and any tensors it
// captures (explicit seeds only, no hidden randomness).
Tensor checkpoint(const std::function<Tensor(const std::vector<Tensor>&)>& segment,
                  const std::vector<Tensor>& inputs);

}  // namespace mrf::ad

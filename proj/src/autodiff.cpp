// SPDX-License-Identifier: Apache-2.0
#include "mrfrecon/autodiff.hpp"

#include <algorithm>
#include <unordered_set>

namespace mrf::ad {

namespace {
thread_local uint64_t g_seq = 0;
thread_local bool g_recording = false;
thread_local SavedStats g_stats;
}  // namespace

SavedStats& saved_stats() { return g_stats; }

void reset_saved_stats() { g_stats = SavedStats{}; }

bool recording() { return g_recording; }

NoGradGuard::NoGradGuard() : prev_(g_recording) { g_recording = false; }
NoGradGuard::~NoGradGuard() { g_recording = prev_; }

Node::~Node() {
  if (backward) {
    g_stats.current -= saved_elems;
  }
}

void Node::accumulate(const Tensor& g) {
  if (!grad_acc.defined()) {
    grad_acc = Tensor::zeros(out_shape, out_dtype);
  }
  double* dst = grad_acc.mutable_data();
  const double* src = g.data();
  int64_t n = grad_acc.buffer_len();
  for (int64_t i = 0; i < n; ++i) dst[i] += src[i];
}

std::shared_ptr<Node> make_leaf(const Shape& shape, DType dtype) {
  auto n = std::make_shared<Node>();
  n->seq = ++g_seq;
  n->leaf = true;
  n->out_shape = shape;
  n->out_dtype = dtype;
  return n;
}

void record(Tensor& out, const std::vector<Tensor>& inputs, int64_t saved_elems,
            std::function<void(const Tensor& gout)> fn) {
  if (!g_recording) return;
  bool any = false;
  for (const auto& in : inputs)
    if (in.defined() && in.node()) any = true;
  if (!any) return;
  auto n = std::make_shared<Node>();
  n->seq = ++g_seq;
  n->out_shape = out.shape();
  n->out_dtype = out.dtype();
  for (const auto& in : inputs)
    if (in.defined() && in.node()) n->parents.push_back(in.node());
  n->backward = std::move(fn);
  n->saved_elems = saved_elems;
  g_stats.current += saved_elems;
  g_stats.peak = std::max(g_stats.peak, g_stats.current);
  out.set_node(n);
}

Tape::Tape() : prev_recording_(g_recording) { g_recording = true; }

Tape::~Tape() { g_recording = prev_recording_; }

void Tape::backward(const Tensor& loss) {
  require(loss.defined() && loss.numel() == 1 && !loss.is_complex(),
          "backward: loss must be a real scalar, got " +
              (loss.defined() ? shape_str(loss.shape()) : std::string("undefined")));
  if (!loss.node()) return;  // no grad-requiring inputs anywhere
  loss.node()->accumulate(Tensor::scalar(1.0));
  sweep(loss.node());
}

void Tape::backward_seeded(const Tensor& out, const Tensor& gout) {
  if (!out.node()) return;
  out.node()->accumulate(gout);
  sweep(out.node());
}

void Tape::sweep(const std::shared_ptr<Node>& root) {
  // Gather reachable nodes; descending creation order is a valid reverse
  // topological order (parents always precede children).
  std::vector<Node*> order;
  std::unordered_set<Node*> seen;
  std::vector<Node*> stack{root.get()};
  seen.insert(root.get());
  while (!stack.empty()) {
    Node* n = stack.back();
    stack.pop_back();
    order.push_back(n);
    for (auto& p : n->parents) {
      if (seen.insert(p.get()).second) stack.push_back(p.get());
    }
  }
  std::sort(order.begin(), order.end(), [](Node* a, Node* b) { return a->seq > b->seq; });

  // Backward closures compute with raw kernels; recording stays off except
  // inside checkpoint re-execution, which opens its own tape.
  NoGradGuard ng;
  for (Node* n : order) {
    if (n->leaf) continue;
    if (n->grad_acc.defined() && n->backward) {
      n->backward(n->grad_acc);
      ++nodes_visited_;
    }
    if (n->backward) {
      n->backward = nullptr;  // free captured values
      g_stats.current -= n->saved_elems;
      n->saved_elems = 0;
    }
    n->grad_acc = {};  // interior grads are not retained
  }
}

Tensor checkpoint(const std::function<Tensor(const std::vector<Tensor>&)>& segment,
                  const std::vector<Tensor>& inputs) {
  if (!g_recording) {
    return segment(inputs);
  }
  // Forward pass without recording; only boundary inputs are retained.
  Tensor out;
  {
    NoGradGuard ng;
    out = segment(inputs).detached();
  }

  int64_t saved = 0;
  std::vector<Tensor> boundary;
  boundary.reserve(inputs.size());
  for (const auto& in : inputs) {
    boundary.push_back(in.detached());
    saved += in.buffer_len();
  }
  std::vector<std::shared_ptr<Node>> parent_nodes;
  std::vector<size_t> parent_pos;
  for (size_t i = 0; i < inputs.size(); ++i) {
    if (inputs[i].node()) {
      parent_nodes.push_back(inputs[i].node());
      parent_pos.push_back(i);
    }
  }

  auto fn = [segment, boundary, parent_nodes, parent_pos](const Tensor& gout) {
    std::vector<Tensor> leaves;
    leaves.reserve(boundary.size());
    for (const auto& b : boundary) {
      Tensor l = b.detached();
      l.set_requires_grad(true);
      leaves.push_back(l);
    }
    {
      Tape sub;
      Tensor out2 = segment(leaves);
      sub.backward_seeded(out2, gout);
    }
    for (size_t j = 0; j < parent_nodes.size(); ++j) {
      Tensor g = leaves[parent_pos[j]].grad();
      if (g.defined()) parent_nodes[j]->accumulate(g);
    }
  };
  record(out, inputs, saved, std::move(fn));
  return out;
}

}  // namespace mrf::ad

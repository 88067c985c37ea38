#ifndef MATCHGAN_GRAPH_HPP_
#define MATCHGAN_GRAPH_HPP_

#include <deque>
#include <functional>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "matchgan/tensor.hpp"

namespace matchgan {

/// A trainable tensor with its gradient accumulator.
template <class T>
struct Param {
  std::string name;
  Tensor<T> value;
  Tensor<T> grad;

  Param() = default;
  Param(std::string n, Tensor<T> v)
      : name(std::move(n)), value(std::move(v)), grad(value.shape) {}

  void zero_grad() { std::fill(grad.v.begin(), grad.v.end(), T(0)); }
  int64_t numel() const { return value.numel(); }
};

using VarId = int32_t;

/// Eager reverse-mode tape. Ops append nodes in topological order; backward
/// replays the recorded closures in reverse. One Graph instance per update
/// step; parameters live outside and are registered via param().
template <class T>
class Graph {
 public:
  Graph() = default;
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  struct Node {
    Tensor<T> val;
    Tensor<T> grad;  // allocated on first accumulation
    bool needs_grad = false;
    std::function<void()> back;
  };

  bool grad_enabled = true;

  VarId add(Tensor<T> val, bool needs_grad,
            std::function<void()> back = nullptr) {
    needs_grad = needs_grad && grad_enabled;
    nodes_.push_back(Node{std::move(val), Tensor<T>{}, needs_grad,
                          needs_grad ? std::move(back) : nullptr});
    return static_cast<VarId>(nodes_.size() - 1);
  }

  VarId leaf(Tensor<T> val) { return add(std::move(val), false); }

  /// Registers a parameter; repeated registration returns the same node so
  /// multiple uses in one graph accumulate into one gradient.
  VarId param(Param<T>& p) {
    auto it = params_.find(&p);
    if (it != params_.end()) return it->second;
    Param<T>* pp = &p;
    VarId id = add(p.value, true, nullptr);
    if (grad_enabled) {
      nodes_[id].back = [this, id, pp]() {
        const Tensor<T>& gsrc = nodes_[id].grad;
        T* dst = pp->grad.data();
        const T* src = gsrc.data();
        const int64_t n = gsrc.numel();
#pragma omp parallel for schedule(static)
        for (int64_t i = 0; i < n; ++i) dst[i] += src[i];
      };
    }
    params_.emplace(pp, id);
    return id;
  }

  const Tensor<T>& val(VarId id) const { return nodes_[id].val; }
  Tensor<T>& val(VarId id) { return nodes_[id].val; }
  bool needs(VarId id) const { return nodes_[id].needs_grad; }

  /// Gradient tensor of a node, allocated (zeroed) on demand.
  Tensor<T>& grad(VarId id) {
    Node& n = nodes_[id];
    if (n.grad.numel() == 0) n.grad = Tensor<T>(n.val.shape);
    return n.grad;
  }
  bool has_grad(VarId id) const { return nodes_[id].grad.numel() != 0; }

  /// Accumulates `delta` into the gradient of `id` (no-op if grad not
  /// needed there).
  void accum(VarId id, const Tensor<T>& delta) {
    if (!needs(id)) return;
    Tensor<T>& gdst = grad(id);
    const T* src = delta.data();
    T* dst = gdst.data();
    const int64_t n = gdst.numel();
#pragma omp parallel for schedule(static)
    for (int64_t i = 0; i < n; ++i) dst[i] += src[i];
  }

  void set_back(VarId id, std::function<void()> back) {
    if (nodes_[id].needs_grad) nodes_[id].back = std::move(back);
  }

  /// Reverse sweep from a scalar loss node.
  void backward(VarId loss) {
    require(nodes_[loss].val.numel() == 1, ErrorKind::InvalidArgument,
            "backward: loss must be scalar");
    grad(loss)[0] = T(1);
    for (VarId i = loss; i >= 0; --i) {
      Node& n = nodes_[i];
      if (n.back && n.grad.numel() != 0) n.back();
    }
  }

  size_t size() const { return nodes_.size(); }

 private:
  // deque: appending ops never invalidates references to existing node
  // values, which forward code holds across op calls
  std::deque<Node> nodes_;
  std::unordered_map<Param<T>*, VarId> params_;
};

/// Temporarily disables gradient recording on a graph.
template <class T>
class NoGradScope {
 public:
  explicit NoGradScope(Graph<T>& g) : g_(g), prev_(g.grad_enabled) {
    g_.grad_enabled = false;
  }
  ~NoGradScope() { g_.grad_enabled = prev_; }

 private:
  Graph<T>& g_;
  bool prev_;
};

}  // namespace matchgan

#endif  // MATCHGAN_GRAPH_HPP_

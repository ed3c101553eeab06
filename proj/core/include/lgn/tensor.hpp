#pragma once

#include <cstdint>
#include <functional>
#include <initializer_list>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "lgn/errors.hpp"

namespace lgn {

// Extents of a dense row-major array. Rank 0 denotes a scalar (one element).
using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

namespace detail {

// One recorded value in the computation graph. Non-leaf nodes carry a
// backprop closure that accumulates the node's adjoint into its parents.
struct Node {
  Shape shape;
  std::vector<double> values;
  std::vector<double> grad;  // empty until first touched by backward
  bool requires_grad = false;
  bool backward_done = false;
  std::uint64_t seq = 0;  // creation order; doubles as a topological order
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backprop;
  int backprop_runs = 0;

  void ensure_grad() {
    if (grad.empty()) grad.assign(values.size(), 0.0);
  }
};

std::shared_ptr<Node> make_node(Shape shape, std::vector<double> values,
                                bool requires_grad);

bool grad_enabled();

}  // namespace detail

// Dense double-precision array with optional gradient tracking. Handles are
// cheap to copy; the underlying buffer is immutable after construction except
// for the grad buffer and the sanctioned parameter-update path.
class Tensor {
 public:
  Tensor();  // rank-0 scalar holding 0.0
  Tensor(Shape shape, std::vector<double> values, bool requires_grad = false);

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double value, bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);
  static Tensor identity(std::size_t n);

  const Shape& shape() const { return node_->shape; }
  std::size_t rank() const { return node_->shape.size(); }
  std::size_t size() const { return node_->values.size(); }

  std::span<const double> values() const { return node_->values; }
  // Single-writer mutation point used by optimizers and loaders. Must not be
  // called on a tensor that participates in a live graph.
  std::span<double> values_mut() { return node_->values; }

  bool requires_grad() const { return node_->requires_grad; }
  bool has_grad() const { return !node_->grad.empty(); }
  std::span<const double> grad() const;
  void zero_grad();
  void accumulate_grad(std::span<const double> g);

  double item() const;
  double at(std::initializer_list<std::size_t> index) const;

  // Same values, no graph edges, no gradient requirement.
  Tensor detached() const;

  explicit Tensor(std::shared_ptr<detail::Node> node);
  const std::shared_ptr<detail::Node>& node() const { return node_; }

 private:
  std::shared_ptr<detail::Node> node_;
};

// While alive, newly executed operations record no graph edges. Used for
// evaluation passes and the numeric side of gradient checking.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

}  // namespace lgn

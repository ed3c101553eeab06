#include "lgn/tensor.hpp"

#include <atomic>
#include <sstream>

namespace lgn {

std::size_t shape_numel(const Shape& shape) {
  std::size_t n = 1;
  for (std::size_t d : shape) n *= d;
  return n;
}

std::string shape_str(const Shape& shape) {
  std::ostringstream out;
  out << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) out << 'x';
    out << shape[i];
  }
  out << ']';
  return out.str();
}

namespace detail {

namespace {
std::atomic<std::uint64_t> g_next_seq{1};
thread_local bool g_grad_enabled = true;
}  // namespace

bool grad_enabled() { return g_grad_enabled; }

void set_grad_enabled(bool on) { g_grad_enabled = on; }

std::shared_ptr<Node> make_node(Shape shape, std::vector<double> values,
                                bool requires_grad) {
  if (shape_numel(shape) != values.size()) {
    throw DimensionError("tensor shape " + shape_str(shape) + " implies " +
                         std::to_string(shape_numel(shape)) +
                         " elements but " + std::to_string(values.size()) +
                         " values were given");
  }
  auto node = std::make_shared<Node>();
  node->shape = std::move(shape);
  node->values = std::move(values);
  // The no-grad guard suppresses op recording (make_op), not leaf flags:
  // a parameter built under the guard still requires gradients later.
  node->requires_grad = requires_grad;
  node->seq = g_next_seq.fetch_add(1, std::memory_order_relaxed);
  return node;
}

}  // namespace detail

Tensor::Tensor() : Tensor(Shape{}, std::vector<double>{0.0}, false) {}

Tensor::Tensor(Shape shape, std::vector<double> values, bool requires_grad)
    : node_(detail::make_node(std::move(shape), std::move(values),
                              requires_grad)) {}

Tensor::Tensor(std::shared_ptr<detail::Node> node) : node_(std::move(node)) {}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  std::vector<double> v(shape_numel(shape), 0.0);
  return Tensor(std::move(shape), std::move(v), requires_grad);
}

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
  std::vector<double> v(shape_numel(shape), value);
  return Tensor(std::move(shape), std::move(v), requires_grad);
}

Tensor Tensor::scalar(double value, bool requires_grad) {
  return Tensor(Shape{}, std::vector<double>{value}, requires_grad);
}

Tensor Tensor::identity(std::size_t n) {
  std::vector<double> v(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) v[i * n + i] = 1.0;
  return Tensor(Shape{n, n}, std::move(v), false);
}

std::span<const double> Tensor::grad() const {
  if (node_->grad.empty()) {
    throw TapeError("gradient requested but backward has not populated it");
  }
  return node_->grad;
}

void Tensor::zero_grad() {
  // Allocates on first use so that parameters untouched by a backward pass
  // (ablated branches) read as zero gradient rather than missing.
  node_->ensure_grad();
  std::fill(node_->grad.begin(), node_->grad.end(), 0.0);
}

void Tensor::accumulate_grad(std::span<const double> g) {
  if (g.size() != size()) {
    throw DimensionError("gradient of size " + std::to_string(g.size()) +
                         " does not match tensor of size " +
                         std::to_string(size()));
  }
  node_->ensure_grad();
  for (std::size_t i = 0; i < g.size(); ++i) node_->grad[i] += g[i];
}

double Tensor::item() const {
  if (size() != 1) {
    throw DimensionError("item() requires a single-element tensor, got " +
                         shape_str(shape()));
  }
  return node_->values[0];
}

double Tensor::at(std::initializer_list<std::size_t> index) const {
  if (index.size() != rank()) {
    throw DimensionError("index of rank " + std::to_string(index.size()) +
                         " into tensor of shape " + shape_str(shape()));
  }
  std::size_t flat = 0;
  std::size_t axis = 0;
  for (std::size_t idx : index) {
    if (idx >= node_->shape[axis]) {
      throw std::out_of_range("tensor index out of range");
    }
    flat = flat * node_->shape[axis] + idx;
    ++axis;
  }
  return node_->values[flat];
}

Tensor Tensor::detached() const {
  return Tensor(shape(), std::vector<double>(node_->values), false);
}

NoGradGuard::NoGradGuard() : previous_(detail::grad_enabled()) {
  detail::set_grad_enabled(false);
}

NoGradGuard::~NoGradGuard() { detail::set_grad_enabled(previous_); }

}  // namespace lgn

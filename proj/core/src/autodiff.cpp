#include "lgn/autodiff.hpp"
#include <limits>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <unordered_set>
#include <vector>

namespace lgn {

Tape::Tape(const Tensor& root) : root_(root) {
  std::unordered_set<detail::Node*> seen;
  std::vector<detail::Node*> stack{root.node().get()};
  seen.insert(root.node().get());
  while (!stack.empty()) {
    detail::Node* node = stack.back();
    stack.pop_back();
    if (node->backprop) ops_.push_back(node);
    for (const auto& parent : node->parents) {
      if (seen.insert(parent.get()).second) stack.push_back(parent.get());
    }
  }
  // Creation order is a topological order: an operation's inputs always
  // precede it. Walking ops newest-first therefore finishes every consumer
  // before its producers.
  std::sort(ops_.begin(), ops_.end(),
            [](const detail::Node* a, const detail::Node* b) {
              return a->seq > b->seq;
            });
}

void Tape::replay_adjoints() {
  for (detail::Node* node : ops_) {
    node->ensure_grad();
    node->backprop(*node);
    node->backprop_runs += 1;
  }
}

void backward(const Tensor& loss) {
  if (loss.size() != 1) {
    throw DimensionError("backward requires a single-element loss, got " +
                         shape_str(loss.shape()));
  }
  if (!loss.requires_grad()) {
    throw TapeError("backward on a loss that is not connected to a tape");
  }
  if (loss.node()->backward_done) {
    throw TapeError("backward already ran for this loss; rebuild the graph");
  }
  loss.node()->ensure_grad();
  loss.node()->grad[0] = 1.0;
  Tape tape(loss);
  tape.replay_adjoints();
  loss.node()->backward_done = true;
}

namespace {

bool bit_identical(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) return false;
  return std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0;
}

double max_relative_error(std::span<const double> analytic,
                          std::span<const double> numeric) {
  double worst = 0.0;
  for (std::size_t i = 0; i < analytic.size(); ++i) {
    double denom = std::max({std::fabs(analytic[i]), std::fabs(numeric[i]),
                             1e-8});
    worst = std::max(worst, std::fabs(analytic[i] - numeric[i]) / denom);
  }
  return worst;
}

// Central difference with the step chosen per coordinate over a geometric
// ladder. Large steps cross secant kinks of the rectifier and feel the
// violent curvature that stacked normalizations produce; small steps drown
// in cancellation noise. The rule: take the largest step whose neighbor gap
// is already down at the ladder's own consistency level, then Richardson-
// extrapolate that pair to cancel the leading h^2 term. Selection never
// looks at the analytic gradient.
double central_difference(const std::function<double(double)>& probe,
                          double x0, double eps) {
  constexpr int kScales = 4;
  double fd[kScales];
  double h = eps;
  for (int k = 0; k < kScales; ++k, h *= 0.25) {
    fd[k] = (probe(x0 + h) - probe(x0 - h)) / (2.0 * h);
  }
  double gaps[kScales - 1];
  double min_gap = std::numeric_limits<double>::infinity();
  for (int k = 0; k + 1 < kScales; ++k) {
    gaps[k] = std::fabs(fd[k] - fd[k + 1]);
    min_gap = std::min(min_gap, gaps[k]);
  }
  const double magnitude = std::max(std::fabs(fd[0]), std::fabs(fd[1]));
  const double threshold = 4.0 * min_gap + 1e-12 * (1.0 + magnitude);
  for (int k = 0; k + 1 < kScales; ++k) {
    if (gaps[k] <= threshold) {
      return (16.0 * fd[k + 1] - fd[k]) / 15.0;
    }
  }
  return fd[kScales - 1];
}

}  // namespace

double grad_check(const std::function<Tensor(const Tensor&)>& f,
                  const Tensor& x, double eps) {
  if (!(eps > 0.0)) {
    throw ConfigError("grad_check requires eps > 0");
  }
  {
    NoGradGuard guard;
    Tensor y1 = f(x.detached());
    Tensor y2 = f(x.detached());
    if (!bit_identical(y1.values(), y2.values())) {
      throw DeterminismError(
          "grad_check: function under test is not deterministic");
    }
  }

  Tensor leaf(x.shape(), std::vector<double>(x.values().begin(),
                                             x.values().end()),
              /*requires_grad=*/true);
  Tensor y = f(leaf);
  if (y.size() != 1) {
    throw DimensionError("grad_check requires a scalar-valued function, got " +
                         shape_str(y.shape()));
  }
  std::vector<double> analytic(x.size(), 0.0);
  if (y.requires_grad()) {
    backward(y);
    if (leaf.has_grad()) {
      auto g = leaf.grad();
      analytic.assign(g.begin(), g.end());
    }
  }

  std::vector<double> numeric(x.size());
  {
    NoGradGuard guard;
    std::vector<double> values(x.values().begin(), x.values().end());
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double saved = values[i];
      auto probe = [&](double v) {
        values[i] = v;
        double y = f(Tensor(x.shape(), values)).item();
        values[i] = saved;
        return y;
      };
      numeric[i] = central_difference(probe, saved, eps);
    }
  }
  return max_relative_error(analytic, numeric);
}

double grad_check_leaf(const std::function<Tensor()>& loss_fn, Tensor leaf,
                       double eps) {
  if (!(eps > 0.0)) {
    throw ConfigError("grad_check requires eps > 0");
  }
  {
    NoGradGuard guard;
    Tensor y1 = loss_fn();
    Tensor y2 = loss_fn();
    if (!bit_identical(y1.values(), y2.values())) {
      throw DeterminismError(
          "grad_check: function under test is not deterministic");
    }
  }

  leaf.zero_grad();
  Tensor y = loss_fn();
  if (y.size() != 1) {
    throw DimensionError("grad_check requires a scalar-valued function, got " +
                         shape_str(y.shape()));
  }
  std::vector<double> analytic(leaf.size(), 0.0);
  if (y.requires_grad()) {
    backward(y);
    if (leaf.has_grad()) {
      auto g = leaf.grad();
      analytic.assign(g.begin(), g.end());
    }
  }

  std::vector<double> numeric(leaf.size());
  {
    NoGradGuard guard;
    auto values = leaf.values_mut();
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double saved = values[i];
      auto probe = [&](double v) {
        values[i] = v;
        double y = loss_fn().item();
        values[i] = saved;
        return y;
      };
      numeric[i] = central_difference(probe, saved, eps);
    }
  }
  return max_relative_error(analytic, numeric);
}

}  // namespace lgn

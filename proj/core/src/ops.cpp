#include "lgn/ops.hpp"

#include <cmath>

namespace lgn {

namespace {

using detail::Node;

// Builds the output node and, when gradients are wanted, wires parents and
// the backprop closure. The closure receives the output node and must
// accumulate into each parent's grad buffer.
Tensor make_op(Shape shape, std::vector<double> values,
               std::vector<Tensor> inputs,
               std::function<void(Node&)> backprop) {
  bool needs_grad = false;
  for (const Tensor& t : inputs) needs_grad |= t.requires_grad();
  needs_grad = needs_grad && detail::grad_enabled();

  auto node = detail::make_node(std::move(shape), std::move(values), false);
  if (needs_grad) {
    node->requires_grad = true;
    node->parents.reserve(inputs.size());
    for (const Tensor& t : inputs) node->parents.push_back(t.node());
    node->backprop = std::move(backprop);
  }
  return Tensor(std::move(node));
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(op) + ": shapes " + shape_str(a.shape()) +
                         " and " + shape_str(b.shape()) + " differ");
  }
}

// axis strides for the single-axis broadcast ops: the tensor is viewed as
// [outer, extent, inner] around `axis`.
struct AxisView {
  std::size_t outer, extent, inner;
};

AxisView axis_view(const Shape& shape, std::size_t axis) {
  if (axis >= shape.size()) {
    throw DimensionError("broadcast axis " + std::to_string(axis) +
                         " out of range for shape " + shape_str(shape));
  }
  AxisView v{1, shape[axis], 1};
  for (std::size_t i = 0; i < axis; ++i) v.outer *= shape[i];
  for (std::size_t i = axis + 1; i < shape.size(); ++i) v.inner *= shape[i];
  return v;
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "add");
  std::vector<double> out(a.size());
  auto av = a.values(), bv = b.values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] + bv[i];
  Node* an = a.node().get();
  Node* bn = b.node().get();
  return make_op(a.shape(), std::move(out), {a, b}, [an, bn](Node& self) {
    if (an->requires_grad) {
      an->ensure_grad();
      for (std::size_t i = 0; i < self.grad.size(); ++i)
        an->grad[i] += self.grad[i];
    }
    if (bn->requires_grad) {
      bn->ensure_grad();
      for (std::size_t i = 0; i < self.grad.size(); ++i)
        bn->grad[i] += self.grad[i];
    }
  });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "sub");
  std::vector<double> out(a.size());
  auto av = a.values(), bv = b.values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] - bv[i];
  Node* an = a.node().get();
  Node* bn = b.node().get();
  return make_op(a.shape(), std::move(out), {a, b}, [an, bn](Node& self) {
    if (an->requires_grad) {
      an->ensure_grad();
      for (std::size_t i = 0; i < self.grad.size(); ++i)
        an->grad[i] += self.grad[i];
    }
    if (bn->requires_grad) {
      bn->ensure_grad();
      for (std::size_t i = 0; i < self.grad.size(); ++i)
        bn->grad[i] -= self.grad[i];
    }
  });
}

Tensor hadamard(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "hadamard");
  std::vector<double> out(a.size());
  auto av = a.values(), bv = b.values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] * bv[i];
  Node* an = a.node().get();
  Node* bn = b.node().get();
  return make_op(a.shape(), std::move(out), {a, b}, [an, bn](Node& self) {
    if (an->requires_grad) {
      an->ensure_grad();
      for (std::size_t i = 0; i < self.grad.size(); ++i)
        an->grad[i] += self.grad[i] * bn->values[i];
    }
    if (bn->requires_grad) {
      bn->ensure_grad();
      for (std::size_t i = 0; i < self.grad.size(); ++i)
        bn->grad[i] += self.grad[i] * an->values[i];
    }
  });
}

Tensor scale(const Tensor& x, double factor) {
  std::vector<double> out(x.size());
  auto xv = x.values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = xv[i] * factor;
  Node* xn = x.node().get();
  return make_op(x.shape(), std::move(out), {x}, [xn, factor](Node& self) {
    xn->ensure_grad();
    for (std::size_t i = 0; i < self.grad.size(); ++i)
      xn->grad[i] += self.grad[i] * factor;
  });
}

Tensor sigmoid(const Tensor& x) {
  std::vector<double> out(x.size());
  auto xv = x.values();
  for (std::size_t i = 0; i < out.size(); ++i)
    out[i] = 1.0 / (1.0 + std::exp(-xv[i]));
  Node* xn = x.node().get();
  return make_op(x.shape(), std::move(out), {x}, [xn](Node& self) {
    xn->ensure_grad();
    for (std::size_t i = 0; i < self.grad.size(); ++i) {
      double s = self.values[i];
      xn->grad[i] += self.grad[i] * s * (1.0 - s);
    }
  });
}

Tensor tanh(const Tensor& x) {
  std::vector<double> out(x.size());
  auto xv = x.values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::tanh(xv[i]);
  Node* xn = x.node().get();
  return make_op(x.shape(), std::move(out), {x}, [xn](Node& self) {
    xn->ensure_grad();
    for (std::size_t i = 0; i < self.grad.size(); ++i) {
      double t = self.values[i];
      xn->grad[i] += self.grad[i] * (1.0 - t * t);
    }
  });
}

Tensor relu(const Tensor& x) {
  std::vector<double> out(x.size());
  auto xv = x.values();
  for (std::size_t i = 0; i < out.size(); ++i)
    out[i] = xv[i] > 0.0 ? xv[i] : 0.0;
  Node* xn = x.node().get();
  return make_op(x.shape(), std::move(out), {x}, [xn](Node& self) {
    xn->ensure_grad();
    for (std::size_t i = 0; i < self.grad.size(); ++i)
      if (xn->values[i] > 0.0) xn->grad[i] += self.grad[i];
  });
}

Tensor clamp(const Tensor& x, double lo, double hi) {
  if (!(lo < hi)) {
    throw ConfigError("clamp requires lo < hi");
  }
  std::vector<double> out(x.size());
  auto xv = x.values();
  for (std::size_t i = 0; i < out.size(); ++i)
    out[i] = xv[i] < lo ? lo : (xv[i] > hi ? hi : xv[i]);
  Node* xn = x.node().get();
  return make_op(x.shape(), std::move(out), {x}, [xn, lo, hi](Node& self) {
    xn->ensure_grad();
    for (std::size_t i = 0; i < self.grad.size(); ++i) {
      double v = xn->values[i];
      if (v > lo && v < hi) xn->grad[i] += self.grad[i];
    }
  });
}

Tensor mul_vec_axis(const Tensor& x, const Tensor& v, std::size_t axis) {
  AxisView view = axis_view(x.shape(), axis);
  if (v.rank() != 1 || v.shape()[0] != view.extent) {
    throw DimensionError("mul_vec_axis: vector " + shape_str(v.shape()) +
                         " does not match axis " + std::to_string(axis) +
                         " of " + shape_str(x.shape()));
  }
  std::vector<double> out(x.size());
  auto xv = x.values(), vv = v.values();
  std::size_t pos = 0;
  for (std::size_t o = 0; o < view.outer; ++o)
    for (std::size_t e = 0; e < view.extent; ++e)
      for (std::size_t i = 0; i < view.inner; ++i, ++pos)
        out[pos] = xv[pos] * vv[e];
  Node* xn = x.node().get();
  Node* vn = v.node().get();
  return make_op(x.shape(), std::move(out), {x, v}, [xn, vn, view](Node& self) {
    if (xn->requires_grad) {
      xn->ensure_grad();
      std::size_t pos = 0;
      for (std::size_t o = 0; o < view.outer; ++o)
        for (std::size_t e = 0; e < view.extent; ++e)
          for (std::size_t i = 0; i < view.inner; ++i, ++pos)
            xn->grad[pos] += self.grad[pos] * vn->values[e];
    }
    if (vn->requires_grad) {
      vn->ensure_grad();
      std::size_t pos = 0;
      for (std::size_t o = 0; o < view.outer; ++o)
        for (std::size_t e = 0; e < view.extent; ++e)
          for (std::size_t i = 0; i < view.inner; ++i, ++pos)
            vn->grad[e] += self.grad[pos] * xn->values[pos];
    }
  });
}

Tensor add_vec_axis(const Tensor& x, const Tensor& v, std::size_t axis) {
  AxisView view = axis_view(x.shape(), axis);
  if (v.rank() != 1 || v.shape()[0] != view.extent) {
    throw DimensionError("add_vec_axis: vector " + shape_str(v.shape()) +
                         " does not match axis " + std::to_string(axis) +
                         " of " + shape_str(x.shape()));
  }
  std::vector<double> out(x.size());
  auto xv = x.values(), vv = v.values();
  std::size_t pos = 0;
  for (std::size_t o = 0; o < view.outer; ++o)
    for (std::size_t e = 0; e < view.extent; ++e)
      for (std::size_t i = 0; i < view.inner; ++i, ++pos)
        out[pos] = xv[pos] + vv[e];
  Node* xn = x.node().get();
  Node* vn = v.node().get();
  return make_op(x.shape(), std::move(out), {x, v}, [xn, vn, view](Node& self) {
    if (xn->requires_grad) {
      xn->ensure_grad();
      for (std::size_t i = 0; i < self.grad.size(); ++i)
        xn->grad[i] += self.grad[i];
    }
    if (vn->requires_grad) {
      vn->ensure_grad();
      std::size_t pos = 0;
      for (std::size_t o = 0; o < view.outer; ++o)
        for (std::size_t e = 0; e < view.extent; ++e)
          for (std::size_t i = 0; i < view.inner; ++i, ++pos)
            vn->grad[e] += self.grad[pos];
    }
  });
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.shape()[1] != b.shape()[0]) {
    throw DimensionError("matmul: incompatible shapes " +
                         shape_str(a.shape()) + " and " +
                         shape_str(b.shape()));
  }
  const std::size_t m = a.shape()[0], k = a.shape()[1], n = b.shape()[1];
  std::vector<double> out(m * n, 0.0);
  auto av = a.values(), bv = b.values();
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t p = 0; p < k; ++p) {
      double aip = av[i * k + p];
      for (std::size_t j = 0; j < n; ++j)
        out[i * n + j] += aip * bv[p * n + j];
    }
  Node* an = a.node().get();
  Node* bn = b.node().get();
  return make_op({m, n}, std::move(out), {a, b}, [an, bn, m, k, n](Node& self) {
    if (an->requires_grad) {
      // dA = dC * B^T
      an->ensure_grad();
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t p = 0; p < k; ++p) {
          double acc = 0.0;
          for (std::size_t j = 0; j < n; ++j)
            acc += self.grad[i * n + j] * bn->values[p * n + j];
          an->grad[i * k + p] += acc;
        }
    }
    if (bn->requires_grad) {
      // dB = A^T * dC
      bn->ensure_grad();
      for (std::size_t p = 0; p < k; ++p)
        for (std::size_t i = 0; i < m; ++i) {
          double aip = an->values[i * k + p];
          for (std::size_t j = 0; j < n; ++j)
            bn->grad[p * n + j] += aip * self.grad[i * n + j];
        }
    }
  });
}

Tensor matvec(const Tensor& a, const Tensor& x) {
  if (a.rank() != 2 || x.rank() != 1 || a.shape()[1] != x.shape()[0]) {
    throw DimensionError("matvec: incompatible shapes " +
                         shape_str(a.shape()) + " and " +
                         shape_str(x.shape()));
  }
  const std::size_t m = a.shape()[0], k = a.shape()[1];
  std::vector<double> out(m, 0.0);
  auto av = a.values(), xv = x.values();
  for (std::size_t i = 0; i < m; ++i) {
    double acc = 0.0;
    for (std::size_t p = 0; p < k; ++p) acc += av[i * k + p] * xv[p];
    out[i] = acc;
  }
  Node* an = a.node().get();
  Node* xn = x.node().get();
  return make_op({m}, std::move(out), {a, x}, [an, xn, m, k](Node& self) {
    if (an->requires_grad) {
      an->ensure_grad();
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t p = 0; p < k; ++p)
          an->grad[i * k + p] += self.grad[i] * xn->values[p];
    }
    if (xn->requires_grad) {
      xn->ensure_grad();
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t p = 0; p < k; ++p)
          xn->grad[p] += an->values[i * k + p] * self.grad[i];
    }
  });
}

Tensor reshape(const Tensor& x, Shape new_shape) {
  if (shape_numel(new_shape) != x.size()) {
    throw DimensionError("reshape: " + shape_str(x.shape()) + " to " +
                         shape_str(new_shape) + " changes element count");
  }
  std::vector<double> out(x.values().begin(), x.values().end());
  Node* xn = x.node().get();
  return make_op(std::move(new_shape), std::move(out), {x}, [xn](Node& self) {
    xn->ensure_grad();
    for (std::size_t i = 0; i < self.grad.size(); ++i)
      xn->grad[i] += self.grad[i];
  });
}

Tensor concat_vec(const Tensor& a, const Tensor& b) {
  if (a.rank() != 1 || b.rank() != 1) {
    throw DimensionError("concat_vec requires rank-1 inputs, got " +
                         shape_str(a.shape()) + " and " +
                         shape_str(b.shape()));
  }
  std::vector<double> out;
  out.reserve(a.size() + b.size());
  out.insert(out.end(), a.values().begin(), a.values().end());
  out.insert(out.end(), b.values().begin(), b.values().end());
  const std::size_t na = a.size();
  Node* an = a.node().get();
  Node* bn = b.node().get();
  return make_op({a.size() + b.size()}, std::move(out), {a, b},
                 [an, bn, na](Node& self) {
                   if (an->requires_grad) {
                     an->ensure_grad();
                     for (std::size_t i = 0; i < na; ++i)
                       an->grad[i] += self.grad[i];
                   }
                   if (bn->requires_grad) {
                     bn->ensure_grad();
                     for (std::size_t i = na; i < self.grad.size(); ++i)
                       bn->grad[i - na] += self.grad[i];
                   }
                 });
}

Tensor lookup_row(const Tensor& table, std::size_t row) {
  if (table.rank() != 2) {
    throw DimensionError("lookup_row requires a rank-2 table, got " +
                         shape_str(table.shape()));
  }
  if (row >= table.shape()[0]) {
    throw DimensionError("lookup_row: row " + std::to_string(row) +
                         " out of range for table " +
                         shape_str(table.shape()));
  }
  const std::size_t width = table.shape()[1];
  auto tv = table.values();
  std::vector<double> out(tv.begin() + row * width,
                          tv.begin() + (row + 1) * width);
  Node* tn = table.node().get();
  return make_op({width}, std::move(out), {table},
                 [tn, row, width](Node& self) {
                   tn->ensure_grad();
                   for (std::size_t i = 0; i < width; ++i)
                     tn->grad[row * width + i] += self.grad[i];
                 });
}

Tensor sum(const Tensor& x) {
  double acc = 0.0;
  for (double v : x.values()) acc += v;
  Node* xn = x.node().get();
  return make_op({}, {acc}, {x}, [xn](Node& self) {
    xn->ensure_grad();
    for (std::size_t i = 0; i < xn->grad.size(); ++i)
      xn->grad[i] += self.grad[0];
  });
}

namespace {

// Group geometry for l2_normalize: flattened index = sum over axes of
// idx[axis] * stride[axis]; group axes vary, the rest form the outer index.
struct GroupPlan {
  std::vector<std::size_t> offsets;      // base offset of each group
  std::vector<std::size_t> member_step;  // offset of each member within a group
};

GroupPlan plan_groups(const Shape& shape, std::span<const std::size_t> axes) {
  if (shape.empty()) {
    throw DimensionError("l2_normalize requires rank >= 1");
  }
  std::vector<bool> grouped(shape.size(), false);
  for (std::size_t a : axes) {
    if (a >= shape.size()) {
      throw DimensionError("l2_normalize axis " + std::to_string(a) +
                           " out of range for shape " + shape_str(shape));
    }
    if (grouped[a]) throw DimensionError("l2_normalize axis repeated");
    grouped[a] = true;
  }
  if (axes.empty()) throw DimensionError("l2_normalize needs at least one axis");

  std::vector<std::size_t> strides(shape.size(), 1);
  for (std::size_t i = shape.size() - 1; i > 0; --i)
    strides[i - 1] = strides[i] * shape[i];

  GroupPlan plan;
  plan.offsets = {0};
  plan.member_step = {0};
  for (std::size_t axis = 0; axis < shape.size(); ++axis) {
    auto& target = grouped[axis] ? plan.member_step : plan.offsets;
    std::vector<std::size_t> expanded;
    expanded.reserve(target.size() * shape[axis]);
    for (std::size_t base : target)
      for (std::size_t i = 0; i < shape[axis]; ++i)
        expanded.push_back(base + i * strides[axis]);
    target = std::move(expanded);
  }
  return plan;
}

}  // namespace

Tensor l2_normalize(const Tensor& x, std::span<const std::size_t> axes,
                    double eps) {
  if (!(eps > 0.0)) {
    throw ConfigError("l2_normalize requires eps > 0");
  }
  GroupPlan plan = plan_groups(x.shape(), axes);
  auto xv = x.values();
  std::vector<double> out(x.size());
  std::vector<double> divisors(plan.offsets.size());
  for (std::size_t g = 0; g < plan.offsets.size(); ++g) {
    std::size_t base = plan.offsets[g];
    double sq = 0.0;
    for (std::size_t step : plan.member_step) {
      double v = xv[base + step];
      sq += v * v;
    }
    double norm = std::sqrt(sq);
    double div = norm >= eps ? norm : eps;
    divisors[g] = norm >= eps ? norm : 0.0;  // 0 marks the eps branch
    for (std::size_t step : plan.member_step)
      out[base + step] = xv[base + step] / div;
  }
  Node* xn = x.node().get();
  return make_op(x.shape(), std::move(out), {x},
                 [xn, plan = std::move(plan), divisors = std::move(divisors),
                  eps](Node& self) {
                   xn->ensure_grad();
                   for (std::size_t g = 0; g < plan.offsets.size(); ++g) {
                     std::size_t base = plan.offsets[g];
                     double norm = divisors[g];
                     if (norm == 0.0) {
                       // Below eps the divisor is the constant eps.
                       for (std::size_t step : plan.member_step)
                         xn->grad[base + step] += self.grad[base + step] / eps;
                       continue;
                     }
                     double dot = 0.0;
                     for (std::size_t step : plan.member_step)
                       dot += self.grad[base + step] * xn->values[base + step];
                     double n3 = norm * norm * norm;
                     for (std::size_t step : plan.member_step) {
                       xn->grad[base + step] +=
                           self.grad[base + step] / norm -
                           xn->values[base + step] * dot / n3;
                     }
                   }
                 });
}

Tensor l2_normalize(const Tensor& x, std::size_t axis, double eps) {
  const std::size_t axes[1] = {axis};
  return l2_normalize(x, std::span<const std::size_t>(axes), eps);
}

Tensor conv2d(const Tensor& x, const Tensor& kernels, const Tensor& bias) {
  if (x.rank() != 3 || kernels.rank() != 4 || bias.rank() != 1) {
    throw DimensionError(
        "conv2d expects input [C_in,H,W], kernels [C_out,C_in,k,k], bias "
        "[C_out]; got " +
        shape_str(x.shape()) + ", " + shape_str(kernels.shape()) + ", " +
        shape_str(bias.shape()));
  }
  const std::size_t c_in = x.shape()[0], h = x.shape()[1], w = x.shape()[2];
  const std::size_t c_out = kernels.shape()[0], k = kernels.shape()[2];
  if (kernels.shape()[1] != c_in) {
    throw DimensionError("conv2d: kernel channel count " +
                         shape_str(kernels.shape()) +
                         " does not match input " + shape_str(x.shape()));
  }
  if (kernels.shape()[3] != k || k % 2 == 0) {
    throw DimensionError("conv2d: kernels must be square with odd size, got " +
                         shape_str(kernels.shape()));
  }
  if (bias.shape()[0] != c_out) {
    throw DimensionError("conv2d: bias " + shape_str(bias.shape()) +
                         " does not match " + std::to_string(c_out) +
                         " output channels");
  }
  const std::ptrdiff_t pad = static_cast<std::ptrdiff_t>(k / 2);
  auto xv = x.values();
  auto kv = kernels.values();
  auto bv = bias.values();
  std::vector<double> out(c_out * h * w);
  for (std::size_t co = 0; co < c_out; ++co) {
    double* out_plane = out.data() + co * h * w;
    for (std::size_t i = 0; i < h * w; ++i) out_plane[i] = bv[co];
    for (std::size_t ci = 0; ci < c_in; ++ci) {
      const double* in_plane = xv.data() + ci * h * w;
      const double* kern = kv.data() + (co * c_in + ci) * k * k;
      for (std::size_t ky = 0; ky < k; ++ky) {
        for (std::size_t kx = 0; kx < k; ++kx) {
          const double kval = kern[ky * k + kx];
          if (kval == 0.0) continue;
          const std::ptrdiff_t dy = static_cast<std::ptrdiff_t>(ky) - pad;
          const std::ptrdiff_t dx = static_cast<std::ptrdiff_t>(kx) - pad;
          const std::ptrdiff_t y0 = std::max<std::ptrdiff_t>(0, -dy);
          const std::ptrdiff_t y1 =
              std::min<std::ptrdiff_t>(h, static_cast<std::ptrdiff_t>(h) - dy);
          const std::ptrdiff_t x0 = std::max<std::ptrdiff_t>(0, -dx);
          const std::ptrdiff_t x1 =
              std::min<std::ptrdiff_t>(w, static_cast<std::ptrdiff_t>(w) - dx);
          for (std::ptrdiff_t y = y0; y < y1; ++y) {
            double* orow = out_plane + y * w;
            const double* irow = in_plane + (y + dy) * w + dx;
            for (std::ptrdiff_t xp = x0; xp < x1; ++xp)
              orow[xp] += kval * irow[xp];
          }
        }
      }
    }
  }
  Node* xn = x.node().get();
  Node* kn = kernels.node().get();
  Node* bn = bias.node().get();
  return make_op(
      {c_out, h, w}, std::move(out), {x, kernels, bias},
      [xn, kn, bn, c_in, c_out, h, w, k, pad](Node& self) {
        const double* gout = self.grad.data();
        if (bn->requires_grad) {
          bn->ensure_grad();
          for (std::size_t co = 0; co < c_out; ++co) {
            double acc = 0.0;
            const double* plane = gout + co * h * w;
            for (std::size_t i = 0; i < h * w; ++i) acc += plane[i];
            bn->grad[co] += acc;
          }
        }
        if (kn->requires_grad) {
          kn->ensure_grad();
          for (std::size_t co = 0; co < c_out; ++co)
            for (std::size_t ci = 0; ci < c_in; ++ci) {
              const double* gplane = gout + co * h * w;
              const double* in_plane = xn->values.data() + ci * h * w;
              double* gkern = kn->grad.data() + (co * c_in + ci) * k * k;
              for (std::size_t ky = 0; ky < k; ++ky)
                for (std::size_t kx = 0; kx < k; ++kx) {
                  const std::ptrdiff_t dy = static_cast<std::ptrdiff_t>(ky) - pad;
                  const std::ptrdiff_t dx = static_cast<std::ptrdiff_t>(kx) - pad;
                  const std::ptrdiff_t y0 = std::max<std::ptrdiff_t>(0, -dy);
                  const std::ptrdiff_t y1 = std::min<std::ptrdiff_t>(
                      h, static_cast<std::ptrdiff_t>(h) - dy);
                  const std::ptrdiff_t x0 = std::max<std::ptrdiff_t>(0, -dx);
                  const std::ptrdiff_t x1 = std::min<std::ptrdiff_t>(
                      w, static_cast<std::ptrdiff_t>(w) - dx);
                  double acc = 0.0;
                  for (std::ptrdiff_t y = y0; y < y1; ++y) {
                    const double* grow = gplane + y * w;
                    const double* irow = in_plane + (y + dy) * w + dx;
                    for (std::ptrdiff_t xp = x0; xp < x1; ++xp)
                      acc += grow[xp] * irow[xp];
                  }
                  gkern[ky * k + kx] += acc;
                }
            }
        }
        if (xn->requires_grad) {
          xn->ensure_grad();
          for (std::size_t co = 0; co < c_out; ++co)
            for (std::size_t ci = 0; ci < c_in; ++ci) {
              const double* gplane = gout + co * h * w;
              double* gin = xn->grad.data() + ci * h * w;
              const double* kern = kn->values.data() + (co * c_in + ci) * k * k;
              for (std::size_t ky = 0; ky < k; ++ky)
                for (std::size_t kx = 0; kx < k; ++kx) {
                  const double kval = kern[ky * k + kx];
                  if (kval == 0.0) continue;
                  const std::ptrdiff_t dy = static_cast<std::ptrdiff_t>(ky) - pad;
                  const std::ptrdiff_t dx = static_cast<std::ptrdiff_t>(kx) - pad;
                  const std::ptrdiff_t y0 = std::max<std::ptrdiff_t>(0, -dy);
                  const std::ptrdiff_t y1 = std::min<std::ptrdiff_t>(
                      h, static_cast<std::ptrdiff_t>(h) - dy);
                  const std::ptrdiff_t x0 = std::max<std::ptrdiff_t>(0, -dx);
                  const std::ptrdiff_t x1 = std::min<std::ptrdiff_t>(
                      w, static_cast<std::ptrdiff_t>(w) - dx);
                  for (std::ptrdiff_t y = y0; y < y1; ++y) {
                    const double* grow = gplane + y * w;
                    double* irow = gin + (y + dy) * w + dx;
                    for (std::ptrdiff_t xp = x0; xp < x1; ++xp)
                      irow[xp] += kval * grow[xp];
                  }
                }
            }
        }
      });
}

Tensor dropout(const Tensor& x, double drop_probability, bool training,
               Rng& rng) {
  if (!(drop_probability >= 0.0 && drop_probability < 1.0)) {
    throw ConfigError("dropout drop_probability must lie in [0, 1), got " +
                      std::to_string(drop_probability));
  }
  if (!training || drop_probability == 0.0) {
    // Evaluation mode is exactly the identity.
    std::vector<double> out(x.values().begin(), x.values().end());
    Node* xn = x.node().get();
    return make_op(x.shape(), std::move(out), {x}, [xn](Node& self) {
      xn->ensure_grad();
      for (std::size_t i = 0; i < self.grad.size(); ++i)
        xn->grad[i] += self.grad[i];
    });
  }
  const double keep_scale = 1.0 / (1.0 - drop_probability);
  std::vector<double> mask(x.size());
  for (std::size_t i = 0; i < mask.size(); ++i)
    mask[i] = rng.uniform() < drop_probability ? 0.0 : keep_scale;
  std::vector<double> out(x.size());
  auto xv = x.values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = xv[i] * mask[i];
  Node* xn = x.node().get();
  return make_op(x.shape(), std::move(out), {x},
                 [xn, mask = std::move(mask)](Node& self) {
                   xn->ensure_grad();
                   for (std::size_t i = 0; i < self.grad.size(); ++i)
                     xn->grad[i] += self.grad[i] * mask[i];
                 });
}

}  // namespace lgn

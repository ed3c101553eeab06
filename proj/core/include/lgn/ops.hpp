#pragma once

#include <span>

#include "lgn/rng.hpp"
#include "lgn/tensor.hpp"

namespace lgn {

// Elementwise binary ops require identical shapes. The declared broadcast
// variants (*_vec_axis) spread a vector along one axis of the other operand;
// no other broadcasting exists.

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor hadamard(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& x, double factor);

Tensor sigmoid(const Tensor& x);
Tensor tanh(const Tensor& x);
Tensor relu(const Tensor& x);
// Subgradient convention: zero outside [lo, hi], identity inside.
Tensor clamp(const Tensor& x, double lo, double hi);

// y[.., i, ..] = x[.., i, ..] * v[i] with v indexed along `axis`.
Tensor mul_vec_axis(const Tensor& x, const Tensor& v, std::size_t axis);
Tensor add_vec_axis(const Tensor& x, const Tensor& v, std::size_t axis);

// Strictly rank-2 matrix product [m x k] * [k x n] -> [m x n].
Tensor matmul(const Tensor& a, const Tensor& b);
// [m x k] * [k] -> [m].
Tensor matvec(const Tensor& a, const Tensor& x);

Tensor reshape(const Tensor& x, Shape new_shape);
Tensor concat_vec(const Tensor& a, const Tensor& b);
// Row gather from a rank-2 table; the adjoint scatter-adds into that row.
Tensor lookup_row(const Tensor& table, std::size_t row);

Tensor sum(const Tensor& x);

// Divides each group by max(||group||_2, eps). A group is the set of
// elements obtained by varying the given axes with all other indices fixed.
Tensor l2_normalize(const Tensor& x, std::span<const std::size_t> axes,
                    double eps = 1e-12);
Tensor l2_normalize(const Tensor& x, std::size_t axis, double eps = 1e-12);

// Cross-correlation with zero padding preserving H x W. x is [C_in, H, W],
// kernels [C_out, C_in, k, k] with k odd, bias [C_out].
Tensor conv2d(const Tensor& x, const Tensor& kernels, const Tensor& bias);

// Inverted dropout: training mode zeroes each element with probability
// drop_probability and scales survivors by 1/(1-p); evaluation is identity.
Tensor dropout(const Tensor& x, double drop_probability, bool training,
               Rng& rng);

}  // namespace lgn

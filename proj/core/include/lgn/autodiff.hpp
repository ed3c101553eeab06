#pragma once

#include <functional>

#include "lgn/tensor.hpp"

namespace lgn {

// Ordered record of the operations reachable from one root tensor, in
// execution order. Replaying adjoints walks it once, back to front.
class Tape {
 public:
  explicit Tape(const Tensor& root);

  std::size_t operation_count() const { return ops_.size(); }

  // Runs every recorded operation's adjoint exactly once, in reverse
  // execution order. Requires the root's grad to be seeded.
  void replay_adjoints();

 private:
  Tensor root_;                      // keeps the graph alive
  std::vector<detail::Node*> ops_;   // descending creation order
};

// Seeds d(loss)/d(loss) = 1 and populates grad for every reachable leaf
// that requires gradients. The loss must be a single-element tensor attached
// to a graph; a second call on the same loss throws TapeError.
void backward(const Tensor& loss);

// Max over coordinates of |analytic - central difference| relative error,
// with denominators floored at 1e-8. f must be scalar-valued and
// deterministic; non-determinism is detected and reported.
double grad_check(const std::function<Tensor(const Tensor&)>& f,
                  const Tensor& x, double eps = 1e-3);

// Variant for checking a model loss against one leaf it closes over. The
// leaf's values are perturbed in place for the numeric side and restored.
double grad_check_leaf(const std::function<Tensor()>& loss_fn, Tensor leaf,
                       double eps = 1e-3);

}  // namespace lgn

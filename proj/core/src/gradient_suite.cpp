#include "lgn/gradient_suite.hpp"

#include "lgn/autodiff.hpp"
#include "lgn/model.hpp"
#include "lgn/ops.hpp"
#include "lgn/rng.hpp"
#include "lgn/training.hpp"

namespace lgn {

namespace {

Tensor random_tensor(Shape shape, Rng& rng, double lo = -1.0,
                     double hi = 1.0) {
  std::vector<double> v(shape_numel(shape));
  for (double& x : v) x = rng.uniform(lo, hi);
  return Tensor(std::move(shape), std::move(v));
}

}  // namespace

std::vector<GradCheckResult> core_op_gradient_suite(std::uint64_t seed) {
  Rng rng(mix_seed(seed, 0x6f95));
  std::vector<GradCheckResult> results;
  auto check = [&results](const char* name, double err) {
    results.push_back({name, err});
  };
  const double eps = 1e-5;

  Tensor x = random_tensor({4, 4}, rng);
  Tensor partner = random_tensor({4, 4}, rng);
  check("sum", grad_check([](const Tensor& t) { return sum(t); }, x, eps));
  check("sigmoid",
        grad_check([](const Tensor& t) { return sum(sigmoid(t)); }, x, eps));
  check("tanh",
        grad_check([](const Tensor& t) { return sum(tanh(t)); }, x, eps));
  check("scale",
        grad_check([](const Tensor& t) { return sum(scale(t, -1.7)); }, x,
                   eps));
  Tensor shifted = random_tensor({4, 4}, rng, 0.2, 1.2);
  check("relu",
        grad_check([](const Tensor& t) { return sum(relu(t)); }, shifted,
                   eps));
  check("clamp", grad_check(
                     [](const Tensor& t) { return sum(clamp(t, -0.8, 0.8)); },
                     random_tensor({4, 4}, rng, -0.5, 0.5), eps));
  check("add",
        grad_check([&](const Tensor& t) { return sum(add(t, partner)); }, x,
                   eps));
  check("sub",
        grad_check([&](const Tensor& t) { return sum(sub(partner, t)); }, x,
                   eps));
  check("hadamard",
        grad_check([&](const Tensor& t) { return sum(hadamard(t, partner)); },
                   x, eps));

  Tensor a = random_tensor({3, 4}, rng);
  Tensor b = random_tensor({4, 2}, rng);
  Tensor v4 = random_tensor({4}, rng);
  check("matmul.lhs",
        grad_check([&](const Tensor& t) { return sum(matmul(t, b)); }, a,
                   eps));
  check("matmul.rhs",
        grad_check([&](const Tensor& t) { return sum(matmul(a, t)); }, b,
                   eps));
  check("matvec.matrix",
        grad_check([&](const Tensor& t) { return sum(matvec(t, v4)); }, a,
                   eps));
  check("matvec.vector",
        grad_check([&](const Tensor& t) { return sum(matvec(a, t)); }, v4,
                   eps));

  Tensor x448 = random_tensor({4, 4, 8}, rng);
  Tensor v_axis = random_tensor({4}, rng);
  check("mul_vec_axis.map",
        grad_check(
            [&](const Tensor& t) { return sum(mul_vec_axis(t, v_axis, 0)); },
            x448, eps));
  check("mul_vec_axis.vector",
        grad_check(
            [&](const Tensor& t) { return sum(mul_vec_axis(x448, t, 1)); },
            v_axis, eps));
  check("add_vec_axis.map",
        grad_check(
            [&](const Tensor& t) { return sum(add_vec_axis(t, v_axis, 0)); },
            x448, eps));
  check("add_vec_axis.vector",
        grad_check(
            [&](const Tensor& t) { return sum(add_vec_axis(x448, t, 0)); },
            v_axis, eps));

  Tensor x48 = random_tensor({4, 8}, rng, 0.3, 1.3);
  Tensor head48 = random_tensor({4, 8}, rng);
  check("l2_normalize.rows",
        grad_check(
            [&](const Tensor& t) {
              return sum(hadamard(l2_normalize(t, 1), head48));
            },
            x48, eps));
  check("l2_normalize.cols",
        grad_check(
            [&](const Tensor& t) {
              return sum(hadamard(l2_normalize(t, 0), head48));
            },
            x48, eps));

  Tensor img = random_tensor({2, 6, 5}, rng);
  Tensor kern = random_tensor({3, 2, 3, 3}, rng);
  Tensor bias = random_tensor({3}, rng);
  Tensor weight = random_tensor({3, 6, 5}, rng);
  auto conv_head = [&](const Tensor& y) { return sum(hadamard(y, weight)); };
  check("conv2d.input",
        grad_check(
            [&](const Tensor& t) { return conv_head(conv2d(t, kern, bias)); },
            img, eps));
  check("conv2d.kernels",
        grad_check(
            [&](const Tensor& t) { return conv_head(conv2d(img, t, bias)); },
            kern, eps));
  check("conv2d.bias",
        grad_check(
            [&](const Tensor& t) { return conv_head(conv2d(img, kern, t)); },
            bias, eps));

  Tensor v6 = random_tensor({6}, rng);
  Tensor v2 = random_tensor({2}, rng);
  Tensor reshape_head = random_tensor({2, 3}, rng);
  check("reshape",
        grad_check(
            [&](const Tensor& t) {
              return sum(hadamard(reshape(t, {2, 3}), reshape_head));
            },
            v6, eps));
  check("concat_vec",
        grad_check([&](const Tensor& t) { return sum(concat_vec(t, v2)); },
                   v6, eps));
  Tensor table = random_tensor({5, 3}, rng);
  check("lookup_row",
        grad_check([&](const Tensor& t) { return sum(lookup_row(t, 2)); },
                   table, eps));

  Tensor big = random_tensor({4, 4, 8}, rng);
  check("dropout",
        grad_check(
            [seed](const Tensor& t) {
              Rng drop_rng(mix_seed(seed, 0xd70b));
              return sum(dropout(t, 0.5, true, drop_rng));
            },
            big, eps));

  const std::size_t n = 4;
  auto valid = build_validity_mask(n);
  std::vector<double> labels(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i; j < n; ++j) labels[i * n + j] = rng.uniform();
  Tensor y({n, n}, std::move(labels));
  std::vector<double> p0(n * n, 0.5);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i; j < n; ++j) p0[i * n + j] = rng.uniform(0.1, 0.9);
  check("masked_bce",
        grad_check([&](const Tensor& p) { return masked_bce(p, y, valid); },
                   Tensor({n, n}, std::move(p0)), 1e-4));
  return results;
}

std::vector<GradCheckResult> full_model_gradient_suite(std::uint64_t seed) {
  ModelConfig cfg;
  cfg.N = 4;
  cfg.d_v = 6;
  cfg.d_w = 3;
  cfg.d_h = 8;
  cfg.d_s = 5;
  cfg.n_early = 2;
  cfg.n_conv = 2;
  cfg.n_late = 2;
  cfg.kernel_size = 3;
  cfg.dropout = 0.0;
  cfg.seed = seed;

  Rng rng(seed);
  LgnModel model(cfg, Vocabulary({"find", "the", "red", "cat", "blue",
                                  "dog"}),
                 rng);
  Rng data_rng(mix_seed(seed, 0xda7a));
  ClipFeatureSequence video;
  video.video_id = "gradcheck";
  video.duration_s = 8.0;
  video.features = random_tensor({cfg.N, cfg.d_v}, data_rng);
  TemporalMap map = pool_moment_features(video, cfg.pooling);
  std::vector<int> ids = model.encode({"find", "red", "cat"});  // length 3
  Tensor labels = label_field(iou_field(cfg.N, MomentSpan(2.0, 6.0), 8.0),
                              map.valid, LabelConfig{});
  auto loss_fn = [&]() {
    RunContext ctx;
    ForwardResult out = model.forward_from_map(map, ids, ctx);
    return masked_bce(out.scores, labels, map.valid);
  };

  std::vector<GradCheckResult> results;
  for (Parameter& p : model.params().items()) {
    results.push_back({p.name, grad_check_leaf(loss_fn, p.tensor)});
  }
  return results;
}

}  // namespace lgn

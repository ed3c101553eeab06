#include <cmath>
#include <filesystem>

#include "doctest.h"
#include "lgn/autodiff.hpp"
#include "lgn/checkpoint.hpp"
#include "lgn/ops.hpp"
#include "lgn/synth.hpp"
#include "lgn/training.hpp"

using namespace lgn;

namespace {

ModelConfig small_config() {
  ModelConfig cfg;
  cfg.N = 8;
  cfg.d_v = 8;
  cfg.d_w = 6;
  cfg.d_h = 8;
  cfg.d_s = 8;
  cfg.n_early = 1;
  cfg.n_conv = 2;
  cfg.n_late = 1;
  cfg.dropout = 0.25;
  cfg.seed = 11;
  return cfg;
}

SyntheticConfig small_synth(Hardness hardness = Hardness::Easy) {
  SyntheticConfig cfg;
  cfg.n_videos = 16;
  cfg.clips_per_video = 8;
  cfg.d_v = 8;
  cfg.duration_s = 16.0;
  cfg.concepts = 4;
  cfg.vocab_per_concept = 1;
  cfg.noise_sigma = 0.1;
  cfg.span_min = 1;
  cfg.span_max = 4;
  cfg.hardness = hardness;
  cfg.seed = 5;
  return cfg;
}

std::filesystem::path fresh_dir(const char* name) {
  auto dir = std::filesystem::temp_directory_path() / name;
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace

TEST_SUITE_BEGIN("training");

TEST_CASE("soft_label follows the three branches") {
  LabelConfig cfg{0.0, 0.5};
  CHECK(soft_label(0.25, cfg) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(soft_label(0.7, cfg) == 1.0);
  CHECK(soft_label(0.0, cfg) == 0.0);
  CHECK(soft_label(0.5, cfg) == 1.0);  // upper branch is closed
}

TEST_CASE("soft_label equals the branch oracle on a 101-point grid") {
  for (auto [t_min, t_max] : std::vector<std::pair<double, double>>{
           {0.0, 0.5}, {0.1, 0.9}, {0.3, 0.7}}) {
    LabelConfig cfg{t_min, t_max};
    for (int i = 0; i <= 100; ++i) {
      double o = static_cast<double>(i) / 100.0;
      double expect;
      if (o <= t_min) {
        expect = 0.0;
      } else if (o >= t_max) {
        expect = 1.0;
      } else {
        expect = (o - t_min) / (t_max - t_min);
      }
      CHECK(soft_label(o, cfg) == expect);
    }
  }
}

TEST_CASE("soft_label is non-decreasing") {
  LabelConfig cfg{0.2, 0.8};
  double prev = -1.0;
  for (int i = 0; i <= 200; ++i) {
    double v = soft_label(static_cast<double>(i) / 200.0, cfg);
    CHECK(v >= prev);
    prev = v;
  }
}

TEST_CASE("label config rejects inverted thresholds") {
  CHECK_THROWS_AS((LabelConfig{0.5, 0.5}).validate(), ConfigError);
  CHECK_THROWS_AS((LabelConfig{0.7, 0.3}).validate(), ConfigError);
  CHECK_THROWS_AS((LabelConfig{-0.1, 0.5}).validate(), ConfigError);
}

TEST_CASE("label_field maps zeros to zeros and stays monotone") {
  auto valid = build_validity_mask(4);
  Tensor zeros = Tensor::zeros({4, 4});
  Tensor labels = label_field(zeros, valid, LabelConfig{});
  for (double v : labels.values()) CHECK(v == 0.0);
}

TEST_CASE("label_field hand oracle exercises all three branches") {
  LabelConfig cfg{0.2, 0.6};
  const std::size_t n = 4;
  std::vector<double> field(n * n, 0.0);
  field[0 * n + 0] = 0.1;  // below t_min -> 0
  field[0 * n + 1] = 0.4;  // middle -> 0.5
  field[0 * n + 2] = 0.9;  // above t_max -> 1
  field[1 * n + 3] = 0.2;  // exactly t_min -> 0
  Tensor labels = label_field(Tensor({n, n}, std::move(field)),
                              build_validity_mask(n), cfg);
  CHECK(labels.at({0, 0}) == 0.0);
  CHECK(labels.at({0, 1}) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(labels.at({0, 2}) == 1.0);
  CHECK(labels.at({1, 3}) == 0.0);
}

TEST_CASE("masked_bce equals ln 2 at p = 0.5") {
  const std::size_t n = 4;
  Tensor p = Tensor::full({n, n}, 0.5);
  Rng rng(3);
  std::vector<double> y(n * n);
  for (double& v : y) v = rng.uniform();
  Tensor labels({n, n}, std::move(y));
  Tensor loss = masked_bce(p, labels, build_validity_mask(n));
  CHECK(loss.item() == doctest::Approx(std::log(2.0)).epsilon(1e-12));
}

TEST_CASE("masked_bce single-cell hand value") {
  Tensor p({1, 1}, {0.8});
  Tensor y({1, 1}, {1.0});
  Tensor loss = masked_bce(p, y, build_validity_mask(1));
  CHECK(loss.item() == doctest::Approx(-std::log(0.8)).epsilon(1e-12));
}

TEST_CASE("matching predictions strictly beat the uniform predictor") {
  const std::size_t n = 4;
  auto valid = build_validity_mask(n);
  std::vector<double> y(n * n, 0.0);
  Rng rng(7);
  for (std::size_t a = 0; a < n; ++a)
    for (std::size_t b = a; b < n; ++b)
      y[a * n + b] = rng.uniform() < 0.4 ? 1.0 : 0.0;
  std::vector<double> p_match(n * n, 0.0);
  const double lo = 1.0 / (1.0 + std::exp(30.0));  // clamped-logit floor
  const double hi = 1.0 / (1.0 + std::exp(-30.0));
  for (std::size_t i = 0; i < y.size(); ++i) p_match[i] = y[i] == 1.0 ? hi : lo;
  Tensor labels({n, n}, std::move(y));
  Tensor saturated = masked_bce(Tensor({n, n}, std::move(p_match)), labels,
                                valid);
  Tensor uniform = masked_bce(Tensor::full({n, n}, 0.5), labels, valid);
  CHECK(saturated.item() < uniform.item());
  CHECK(saturated.item() <= 1e-12);
}

TEST_CASE("masked_bce ignores invalid cells bit-exactly") {
  const std::size_t n = 4;
  auto valid = build_validity_mask(n);
  Rng rng(9);
  std::vector<double> p(n * n), y(n * n);
  for (std::size_t i = 0; i < p.size(); ++i) {
    p[i] = rng.uniform(0.05, 0.95);
    y[i] = rng.uniform();
  }
  double base = masked_bce(Tensor({n, n}, p), Tensor({n, n}, y), valid).item();
  // perturb every invalid cell
  for (std::size_t a = 0; a < n; ++a) {
    for (std::size_t b = 0; b < a; ++b) {
      p[a * n + b] = rng.uniform(0.05, 0.95);
      y[a * n + b] = rng.uniform();
    }
  }
  double perturbed =
      masked_bce(Tensor({n, n}, p), Tensor({n, n}, y), valid).item();
  CHECK(base == perturbed);
}

TEST_CASE("masked_bce rejects an empty mask") {
  std::vector<std::uint8_t> empty(4, 0);
  CHECK_THROWS_AS(masked_bce(Tensor::full({2, 2}, 0.5),
                             Tensor::zeros({2, 2}), empty),
                  NoProposalError);
}

TEST_CASE("masked_bce gradient matches finite differences") {
  const std::size_t n = 3;
  auto valid = build_validity_mask(n);
  Rng rng(13);
  std::vector<double> y(n * n, 0.0);
  for (std::size_t a = 0; a < n; ++a)
    for (std::size_t b = a; b < n; ++b) y[a * n + b] = rng.uniform();
  Tensor labels({n, n}, std::move(y));
  std::vector<double> p0(n * n, 0.5);
  for (std::size_t a = 0; a < n; ++a)
    for (std::size_t b = a; b < n; ++b) p0[a * n + b] = rng.uniform(0.1, 0.9);
  double err = grad_check(
      [&](const Tensor& p) { return masked_bce(p, labels, valid); },
      Tensor({n, n}, std::move(p0)), 1e-4);
  CHECK(err <= 1e-4);
}

TEST_CASE("adam leaves parameters unchanged under zero gradients") {
  ParameterCollection params;
  params.add("w", Tensor({3}, {1.0, -2.0, 0.5}, true));
  params.zero_grad();
  AdamState adam(AdamConfig{});
  adam.step(params);
  CHECK(adam.step_count() == 1);
  CHECK(params.at("w").tensor.values()[0] == 1.0);
  CHECK(params.at("w").tensor.values()[1] == -2.0);
  CHECK(params.at("w").tensor.values()[2] == 0.5);
}

TEST_CASE("adam first step matches the hand recurrence") {
  ParameterCollection params;
  params.add("w", Tensor({1}, {2.0}, true));
  params.at("w").tensor.zero_grad();
  params.at("w").tensor.accumulate_grad(std::vector<double>{1.0});
  AdamConfig cfg;
  cfg.learning_rate = 0.1;
  AdamState adam(cfg);
  adam.step(params);
  // m-hat = v-hat = 1 at step 1, so the update is -lr / (1 + eps)
  const double expect = 2.0 - 0.1 / (1.0 + cfg.epsilon);
  CHECK(params.at("w").tensor.values()[0] ==
        doctest::Approx(expect).epsilon(1e-12));
}

TEST_CASE("adam descends a quadratic") {
  ParameterCollection params;
  params.add("w", Tensor({2}, {3.0, -4.0}, true));
  AdamConfig cfg;
  cfg.learning_rate = 0.05;
  AdamState adam(cfg);
  auto loss_value = [&]() {
    auto v = params.at("w").tensor.values();
    return v[0] * v[0] + v[1] * v[1];
  };
  double initial = loss_value();
  for (int i = 0; i < 50; ++i) {
    params.zero_grad();
    Tensor w = params.at("w").tensor;
    backward(sum(hadamard(w, w)));
    adam.step(params);
  }
  CHECK(loss_value() < initial);
}

TEST_CASE("adam names the parameter missing a gradient") {
  ParameterCollection params;
  params.add("first", Tensor({2}, {1.0, 2.0}, true));
  params.add("second.weight", Tensor({2}, {1.0, 2.0}, true));
  params.at("first").tensor.zero_grad();
  AdamState adam(AdamConfig{});
  CHECK_THROWS_WITH_AS(adam.step(params), doctest::Contains("second.weight"),
                       OptimizerError);
}

TEST_CASE("adam never touches frozen rows or frozen parameters") {
  ParameterCollection params;
  params.add("table", Tensor({3, 2}, {0, 0, 1, 2, 3, 4}, true));
  params.add("fixed", Tensor({2}, {5.0, 6.0}, true));
  params.at("table").frozen_rows = {0};
  params.at("fixed").trainable = false;
  params.zero_grad();
  std::vector<double> g{1, 1, 1, 1, 1, 1};
  params.at("table").tensor.accumulate_grad(g);
  AdamState adam(AdamConfig{});
  adam.step(params);
  const Tensor& table = params.at("table").tensor;
  const Tensor& fixed = params.at("fixed").tensor;
  CHECK(table.at({0, 0}) == 0.0);
  CHECK(table.at({0, 1}) == 0.0);
  CHECK(table.at({1, 0}) != 1.0);  // unfrozen rows moved
  CHECK(fixed.values()[0] == 5.0);
  CHECK(fixed.values()[1] == 6.0);
}

TEST_CASE("one epoch on four samples logs one row and writes checkpoints") {
  auto dir = fresh_dir("lgn_train_smoke");
  SyntheticConfig synth_cfg = small_synth();
  synth_cfg.n_videos = 8;  // 4 land in the train split
  generate(synth_cfg, dir / "data");
  auto samples = load_dataset(dir / "data" / "manifest.json", Split::Train);
  REQUIRE(samples.size() == 4);

  ModelConfig cfg = small_config();
  Rng rng(cfg.seed);
  LgnModel model(cfg, vocabulary_from_samples(samples), rng);
  TrainConfig tc;
  tc.epochs = 1;
  tc.batch_size = 2;
  tc.seed = 3;
  auto logs = train(samples, model, tc, dir / "ckpt");
  REQUIRE(logs.size() == 1);
  CHECK(logs[0].epoch == 0);
  CHECK(std::isfinite(logs[0].mean_loss));
  CHECK(std::filesystem::exists(dir / "ckpt" / "final.ckpt"));
  std::filesystem::remove_all(dir);
}

TEST_CASE("loss decreases over thirty epochs on easy synthetic data") {
  auto dir = fresh_dir("lgn_train_descent");
  SyntheticConfig synth_cfg = small_synth();
  synth_cfg.n_videos = 32;
  synth_cfg.noise_sigma = 0.05;
  generate(synth_cfg, dir / "data");
  auto samples = load_dataset(dir / "data" / "manifest.json", Split::Train);

  ModelConfig cfg = small_config();
  cfg.dropout = 0.0;
  Rng rng(cfg.seed);
  LgnModel model(cfg, vocabulary_from_samples(samples), rng);
  TrainConfig tc;
  tc.epochs = 30;
  tc.batch_size = 8;
  tc.seed = 1;
  auto logs = train(samples, model, tc);
  REQUIRE(logs.size() == 30);
  CHECK(logs.back().mean_loss < logs.front().mean_loss);
  std::filesystem::remove_all(dir);
}

TEST_CASE("training is deterministic and resume is bit-exact") {
  auto dir = fresh_dir("lgn_train_resume");
  SyntheticConfig synth_cfg = small_synth();
  generate(synth_cfg, dir / "data");
  auto samples = load_dataset(dir / "data" / "manifest.json", Split::Train);

  ModelConfig cfg = small_config();
  TrainConfig tc;
  tc.epochs = 4;
  tc.batch_size = 4;
  tc.seed = 17;
  tc.checkpoint_every = 2;

  // run A: all four epochs in one go
  Rng rng_a(cfg.seed);
  LgnModel model_a(cfg, vocabulary_from_samples(samples), rng_a);
  auto logs_a = train(samples, model_a, tc, dir / "a");

  // run B: identical seeds, separate instance
  Rng rng_b(cfg.seed);
  LgnModel model_b(cfg, vocabulary_from_samples(samples), rng_b);
  auto logs_b = train(samples, model_b, tc, dir / "b");
  CHECK(model_fingerprint(model_a) == model_fingerprint(model_b));
  for (std::size_t i = 0; i < logs_a.size(); ++i) {
    CHECK(logs_a[i].mean_loss == logs_b[i].mean_loss);
  }

  // run C: resume from the epoch-2 checkpoint of run A
  LgnModel model_c = load_checkpoint(dir / "a" / "epoch_2.ckpt");
  auto logs_c = train(samples, model_c, tc, dir / "a", /*start_epoch=*/2);
  REQUIRE(logs_c.size() == 2);
  CHECK(logs_c[0].mean_loss == logs_a[2].mean_loss);
  CHECK(logs_c[1].mean_loss == logs_a[3].mean_loss);
  CHECK(model_fingerprint(model_c) == model_fingerprint(model_a));
  std::filesystem::remove_all(dir);
}

TEST_SUITE_END();

// Command line front end: synthetic benchmark generation, training,
// evaluation, ablation, gradient checking and dataset statistics.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

#include "CLI11.hpp"
#include "json.hpp"
#include "lgn/checkpoint.hpp"
#include "lgn/config_io.hpp"
#include "lgn/evaluation.hpp"
#include "lgn/gradient_suite.hpp"
#include "lgn/synth.hpp"
#include "lgn/training.hpp"

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

json read_json_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw lgn::ConfigError("cannot open config file: " + path.string());
  }
  try {
    json j;
    in >> j;
    return j;
  } catch (const json::exception& e) {
    throw lgn::ConfigError("config file " + path.string() +
                           " is not valid JSON: " + e.what());
  }
}

struct TrainOptions {
  lgn::ModelConfig model;
  lgn::TrainConfig train;
};

TrainOptions parse_train_config(const std::string& config_path,
                                std::optional<std::uint64_t> seed_override) {
  TrainOptions opts;
  if (!config_path.empty()) {
    json j = read_json_file(config_path);
    if (j.contains("model")) opts.model = j.at("model").get<lgn::ModelConfig>();
    if (j.contains("train")) opts.train = j.at("train").get<lgn::TrainConfig>();
  }
  if (seed_override.has_value()) {
    opts.model.seed = *seed_override;
    opts.train.seed = *seed_override;
  }
  return opts;
}

int run_synth(const std::string& config_path, const std::string& out_dir,
              std::optional<std::uint64_t> seed) {
  lgn::SyntheticConfig cfg;
  if (!config_path.empty()) {
    cfg = read_json_file(config_path).get<lgn::SyntheticConfig>();
  }
  if (seed.has_value()) cfg.seed = *seed;
  lgn::generate(cfg, out_dir);
  lgn::DatasetStats stats = lgn::dataset_stats(fs::path(out_dir) /
                                               "manifest.json");
  std::printf("wrote %zu videos, %zu annotations to %s\n", stats.video_count,
              stats.annotation_count, out_dir.c_str());
  return 0;
}

int run_train(const std::string& data_dir, const std::string& config_path,
              const std::string& out_ckpt, const std::string& ckpt_dir,
              std::size_t resume_epoch, const std::string& split,
              std::optional<std::uint64_t> seed) {
  TrainOptions opts = parse_train_config(config_path, seed);
  auto samples = lgn::load_dataset(fs::path(data_dir) / "manifest.json",
                                   lgn::split_from_name(split));
  std::optional<fs::path> dir;
  if (!ckpt_dir.empty()) dir = fs::path(ckpt_dir);

  auto log_epoch = [](const lgn::EpochLog& log) {
    json j{{"epoch", log.epoch},
           {"mean_loss", log.mean_loss},
           {"wall_ms", log.wall_ms}};
    std::cout << j.dump() << std::endl;
  };

  if (resume_epoch > 0) {
    if (!dir.has_value()) {
      throw lgn::ConfigError("--resume requires --ckpt-dir");
    }
    lgn::LgnModel model = lgn::load_checkpoint(
        *dir / ("epoch_" + std::to_string(resume_epoch) + ".ckpt"));
    lgn::train(samples, model, opts.train, dir, resume_epoch, log_epoch);
    lgn::save_checkpoint(out_ckpt, model);
  } else {
    lgn::Rng init_rng(opts.model.seed);
    lgn::LgnModel model(opts.model, lgn::vocabulary_from_samples(samples),
                        init_rng);
    lgn::train(samples, model, opts.train, dir, 0, log_epoch);
    lgn::save_checkpoint(out_ckpt, model);
  }
  std::printf("checkpoint written to %s\n", out_ckpt.c_str());
  return 0;
}

int run_eval(const std::string& data_dir, const std::string& ckpt,
             std::optional<double> nms, const std::string& split,
             const std::string& json_out, const std::string& csv_out,
             bool open_threshold) {
  lgn::LgnModel model = lgn::load_checkpoint(ckpt);
  auto samples = lgn::load_dataset(fs::path(data_dir) / "manifest.json",
                                   lgn::split_from_name(split));
  lgn::MetricSpec spec;
  spec.nms_iou = nms;
  spec.open_threshold = open_threshold;

  std::vector<lgn::QueryOutcome> outcomes;
  lgn::MetricReport report = lgn::evaluate(
      samples, model, spec, csv_out.empty() ? nullptr : &outcomes);
  std::cout << report.table();

  if (!json_out.empty()) {
    json entries = json::array();
    for (const auto& e : report.entries) {
      entries.push_back(json{{"n", e.n}, {"m", e.m}, {"percent", e.percent}});
    }
    json j{{"queries", report.query_count},
           {"fingerprint", report.config_fingerprint},
           {"results", entries}};
    std::ofstream out(json_out);
    out << j.dump(2) << '\n';
  }
  if (!csv_out.empty()) {
    lgn::write_outcomes_csv(csv_out, outcomes);
  }
  return 0;
}

int run_ablate(const std::string& data_dir, const std::string& config_path,
               std::size_t seeds, const std::string& json_out) {
  TrainOptions opts = parse_train_config(config_path, std::nullopt);
  auto manifest = fs::path(data_dir) / "manifest.json";
  auto train_set = lgn::load_dataset(manifest, lgn::Split::Train);
  auto test_set = lgn::load_dataset(manifest, lgn::Split::Test);
  std::vector<std::uint64_t> seed_list;
  for (std::size_t s = 1; s <= seeds; ++s) seed_list.push_back(s);
  auto rows = lgn::ablation_report(train_set, test_set, opts.model,
                                   opts.train, seed_list);
  std::cout << lgn::ablation_table(rows);
  if (!json_out.empty()) {
    json j = json::array();
    for (const auto& row : rows) {
      j.push_back(json{{"config", row.name},
                       {"per_seed", row.per_seed},
                       {"median", row.median},
                       {"delta", row.delta}});
    }
    std::ofstream out(json_out);
    out << j.dump(2) << '\n';
  }
  return 0;
}

int run_gradcheck(std::size_t seeds) {
  bool all_ok = true;
  for (std::uint64_t seed = 1; seed <= seeds; ++seed) {
    double worst_op = 0.0;
    for (const auto& r : lgn::core_op_gradient_suite(seed)) {
      worst_op = std::max(worst_op, r.max_relative_error);
      if (r.max_relative_error > 1e-4) {
        std::printf("seed %llu: op %-20s max rel error %.3e  FAIL\n",
                    static_cast<unsigned long long>(seed), r.name.c_str(),
                    r.max_relative_error);
        all_ok = false;
      }
    }
    double worst_model = 0.0;
    for (const auto& r : lgn::full_model_gradient_suite(seed)) {
      worst_model = std::max(worst_model, r.max_relative_error);
      if (r.max_relative_error > 1e-4) {
        std::printf("seed %llu: param %-28s max rel error %.3e  FAIL\n",
                    static_cast<unsigned long long>(seed), r.name.c_str(),
                    r.max_relative_error);
        all_ok = false;
      }
    }
    std::printf("seed %llu: core ops worst %.3e, full model worst %.3e\n",
                static_cast<unsigned long long>(seed), worst_op, worst_model);
  }
  std::printf(all_ok ? "gradcheck OK\n" : "gradcheck FAILED\n");
  return all_ok ? 0 : 1;
}

int run_stats(const std::string& data_dir) {
  lgn::DatasetStats stats =
      lgn::dataset_stats(fs::path(data_dir) / "manifest.json");
  std::printf("videos:               %zu\n", stats.video_count);
  std::printf("annotations:          %zu\n", stats.annotation_count);
  std::printf("mean words/query:     %.2f\n", stats.mean_words_per_query);
  std::printf("mean moments/video:   %.2f\n", stats.mean_moments_per_video);
  std::printf("mean moment duration: %.2fs\n", stats.mean_moment_duration_s);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Language-guided temporal moment retrieval"};
  app.require_subcommand(1);

  std::string config_path, data_dir, out_path, ckpt_path, ckpt_dir;
  std::string split_train = "train", split_test = "test";
  std::string json_out, csv_out;
  std::optional<std::uint64_t> seed;
  std::optional<double> nms;
  std::size_t seeds = 3, gradcheck_seeds = 5, resume_epoch = 0;
  bool open_threshold = false;

  auto* synth = app.add_subcommand("synth", "Generate a synthetic dataset");
  synth->add_option("--config", config_path, "Synthetic config JSON");
  synth->add_option("--out", out_path, "Output dataset directory")
      ->required();
  synth->add_option("--seed", seed, "Override the config seed");

  auto* train_cmd = app.add_subcommand("train", "Train a model");
  train_cmd->add_option("--data", data_dir, "Dataset directory")->required();
  train_cmd->add_option("--config", config_path,
                        "JSON with \"model\" and \"train\" blocks");
  train_cmd->add_option("--out", out_path, "Final checkpoint path")
      ->required();
  train_cmd->add_option("--ckpt-dir", ckpt_dir,
                        "Directory for cadence checkpoints");
  train_cmd->add_option("--resume", resume_epoch,
                        "Resume from epoch_<k>.ckpt in --ckpt-dir");
  train_cmd->add_option("--split", split_train, "Split to train on");
  train_cmd->add_option("--seed", seed, "Override model and train seeds");

  auto* eval_cmd = app.add_subcommand("eval", "Evaluate a checkpoint");
  eval_cmd->add_option("--data", data_dir, "Dataset directory")->required();
  eval_cmd->add_option("--ckpt", ckpt_path, "Checkpoint file")->required();
  eval_cmd->add_option("--nms", nms, "NMS IoU threshold for all n");
  eval_cmd->add_option("--split", split_test, "Split to evaluate");
  eval_cmd->add_option("--json", json_out, "Write the report as JSON");
  eval_cmd->add_option("--csv", csv_out, "Write per-query outcomes as CSV");
  eval_cmd->add_flag("--open-threshold", open_threshold,
                     "Count hits only at IoU strictly above m");

  auto* ablate = app.add_subcommand("ablate",
                                    "Train and score the four ablation rows");
  ablate->add_option("--data", data_dir, "Dataset directory")->required();
  ablate->add_option("--config", config_path,
                     "JSON with \"model\" and \"train\" blocks");
  ablate->add_option("--seeds", seeds, "Number of seeds");
  ablate->add_option("--json", json_out, "Write the table as JSON");

  auto* gradcheck = app.add_subcommand(
      "gradcheck", "Finite-difference check of every operation");
  gradcheck->add_option("--seeds", gradcheck_seeds, "Number of seeds");

  auto* stats = app.add_subcommand("stats", "Dataset statistics");
  stats->add_option("--data", data_dir, "Dataset directory")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (synth->parsed()) return run_synth(config_path, out_path, seed);
    if (train_cmd->parsed()) {
      return run_train(data_dir, config_path, out_path, ckpt_dir,
                       resume_epoch, split_train, seed);
    }
    if (eval_cmd->parsed()) {
      return run_eval(data_dir, ckpt_path, nms, split_test, json_out, csv_out,
                      open_threshold);
    }
    if (ablate->parsed()) {
      return run_ablate(data_dir, config_path, seeds, json_out);
    }
    if (gradcheck->parsed()) return run_gradcheck(gradcheck_seeds);
    if (stats->parsed()) return run_stats(data_dir);
  } catch (const lgn::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << '\n';
    return 2;
  }
  return 2;
}

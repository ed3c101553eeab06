#include "lgn/config_io.hpp"

namespace lgn {

namespace {

template <typename T>
void apply(const nlohmann::json& j, const char* key, T& field) {
  if (j.contains(key)) field = j.at(key).get<T>();
}

}  // namespace

std::string pooling_name(PoolingMode mode) {
  return mode == PoolingMode::Max ? "max" : "mean";
}

PoolingMode pooling_from_name(const std::string& name) {
  if (name == "max") return PoolingMode::Max;
  if (name == "mean") return PoolingMode::Mean;
  throw ConfigError("unknown pooling mode: " + name);
}

void to_json(nlohmann::json& j, const ModelConfig& cfg) {
  j = nlohmann::json{{"N", cfg.N},
                     {"d_v", cfg.d_v},
                     {"d_w", cfg.d_w},
                     {"d_h", cfg.d_h},
                     {"d_s", cfg.d_s},
                     {"n_early", cfg.n_early},
                     {"n_conv", cfg.n_conv},
                     {"n_late", cfg.n_late},
                     {"kernel_size", cfg.kernel_size},
                     {"pooling", pooling_name(cfg.pooling)},
                     {"dropout", cfg.dropout},
                     {"dropout_is_keep", cfg.dropout_is_keep},
                     {"use_early", cfg.use_early},
                     {"use_late", cfg.use_late},
                     {"late_norm_per_channel", cfg.late_norm_per_channel},
                     {"seed", cfg.seed}};
}

void from_json(const nlohmann::json& j, ModelConfig& cfg) {
  if (j.contains("preset")) {
    std::string preset = j.at("preset").get<std::string>();
    if (preset == "paper-dims") {
      cfg = ModelConfig::paper_dims();
    } else if (preset != "default") {
      throw ConfigError("unknown model preset: " + preset);
    }
  }
  apply(j, "N", cfg.N);
  apply(j, "d_v", cfg.d_v);
  apply(j, "d_w", cfg.d_w);
  apply(j, "d_h", cfg.d_h);
  apply(j, "d_s", cfg.d_s);
  apply(j, "n_early", cfg.n_early);
  apply(j, "n_conv", cfg.n_conv);
  apply(j, "n_late", cfg.n_late);
  apply(j, "kernel_size", cfg.kernel_size);
  if (j.contains("pooling")) {
    cfg.pooling = pooling_from_name(j.at("pooling").get<std::string>());
  }
  apply(j, "dropout", cfg.dropout);
  apply(j, "dropout_is_keep", cfg.dropout_is_keep);
  apply(j, "use_early", cfg.use_early);
  apply(j, "use_late", cfg.use_late);
  apply(j, "late_norm_per_channel", cfg.late_norm_per_channel);
  apply(j, "seed", cfg.seed);
}

void to_json(nlohmann::json& j, const TrainConfig& cfg) {
  j = nlohmann::json{{"epochs", cfg.epochs},
                     {"batch_size", cfg.batch_size},
                     {"learning_rate", cfg.learning_rate},
                     {"seed", cfg.seed},
                     {"checkpoint_every", cfg.checkpoint_every},
                     {"t_min", cfg.labels.t_min},
                     {"t_max", cfg.labels.t_max}};
}

void from_json(const nlohmann::json& j, TrainConfig& cfg) {
  apply(j, "epochs", cfg.epochs);
  apply(j, "batch_size", cfg.batch_size);
  apply(j, "learning_rate", cfg.learning_rate);
  apply(j, "seed", cfg.seed);
  apply(j, "checkpoint_every", cfg.checkpoint_every);
  apply(j, "t_min", cfg.labels.t_min);
  apply(j, "t_max", cfg.labels.t_max);
}

void to_json(nlohmann::json& j, const SyntheticConfig& cfg) {
  j = nlohmann::json{{"n_videos", cfg.n_videos},
                     {"clips_per_video", cfg.clips_per_video},
                     {"d_v", cfg.d_v},
                     {"duration_s", cfg.duration_s},
                     {"concepts", cfg.concepts},
                     {"vocab_per_concept", cfg.vocab_per_concept},
                     {"noise_sigma", cfg.noise_sigma},
                     {"span_min", cfg.span_min},
                     {"span_max", cfg.span_max},
                     {"hardness", hardness_name(cfg.hardness)},
                     {"seed", cfg.seed}};
}

void from_json(const nlohmann::json& j, SyntheticConfig& cfg) {
  apply(j, "n_videos", cfg.n_videos);
  apply(j, "clips_per_video", cfg.clips_per_video);
  apply(j, "d_v", cfg.d_v);
  apply(j, "duration_s", cfg.duration_s);
  apply(j, "concepts", cfg.concepts);
  apply(j, "vocab_per_concept", cfg.vocab_per_concept);
  apply(j, "noise_sigma", cfg.noise_sigma);
  apply(j, "span_min", cfg.span_min);
  apply(j, "span_max", cfg.span_max);
  if (j.contains("hardness")) {
    cfg.hardness = hardness_from_name(j.at("hardness").get<std::string>());
  }
  apply(j, "seed", cfg.seed);
}

}  // namespace lgn

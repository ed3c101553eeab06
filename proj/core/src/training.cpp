#include "lgn/training.hpp"

#include <chrono>
#include <cmath>
#include <fstream>

#include "lgn/autodiff.hpp"
#include "lgn/checkpoint.hpp"
#include "lgn/ops.hpp"
#include "wire.hpp"

namespace lgn {

void LabelConfig::validate() const {
  if (!(t_min >= 0.0 && t_min < t_max && t_max <= 1.0)) {
    throw ConfigError("label thresholds require 0 <= t_min < t_max <= 1, got "
                      "t_min = " + std::to_string(t_min) + ", t_max = " +
                      std::to_string(t_max));
  }
}

double soft_label(double overlap, const LabelConfig& cfg) {
  cfg.validate();
  if (overlap <= cfg.t_min) return 0.0;
  if (overlap >= cfg.t_max) return 1.0;
  return (overlap - cfg.t_min) / (cfg.t_max - cfg.t_min);
}

Tensor label_field(const Tensor& iou_field,
                   const std::vector<std::uint8_t>& valid,
                   const LabelConfig& cfg) {
  cfg.validate();
  if (iou_field.size() != valid.size()) {
    throw DimensionError("label_field: IoU field " +
                         shape_str(iou_field.shape()) +
                         " does not match mask of size " +
                         std::to_string(valid.size()));
  }
  auto src = iou_field.values();
  std::vector<double> labels(src.size(), 0.0);
  for (std::size_t i = 0; i < src.size(); ++i) {
    if (valid[i]) labels[i] = soft_label(src[i], cfg);
  }
  return Tensor(iou_field.shape(), std::move(labels));
}

Tensor masked_bce(const Tensor& scores, const Tensor& labels,
                  const std::vector<std::uint8_t>& valid) {
  if (scores.shape() != labels.shape() || scores.size() != valid.size()) {
    throw DimensionError("masked_bce: scores " + shape_str(scores.shape()) +
                         ", labels " + shape_str(labels.shape()) +
                         " and mask of size " + std::to_string(valid.size()) +
                         " must agree");
  }
  std::size_t n_valid = 0;
  for (std::uint8_t v : valid) n_valid += v;
  if (n_valid == 0) {
    throw NoProposalError("masked_bce: empty validity mask");
  }
  auto p = scores.values();
  auto y = labels.values();
  double acc = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (!valid[i]) continue;
    acc += y[i] * std::log(p[i]) + (1.0 - y[i]) * std::log(1.0 - p[i]);
  }
  const double inv_n = 1.0 / static_cast<double>(n_valid);
  const double loss = -acc * inv_n;

  detail::Node* pn = scores.node().get();
  detail::Node* yn = labels.node().get();
  auto node = detail::make_node({}, {loss}, false);
  if ((scores.requires_grad() || labels.requires_grad()) &&
      detail::grad_enabled()) {
    node->requires_grad = true;
    node->parents = {scores.node(), labels.node()};
    node->backprop = [pn, yn, valid, inv_n](detail::Node& self) {
      const double g = self.grad[0];
      if (pn->requires_grad) {
        pn->ensure_grad();
        for (std::size_t i = 0; i < pn->values.size(); ++i) {
          if (!valid[i]) continue;
          const double pi = pn->values[i];
          const double yi = yn->values[i];
          pn->grad[i] +=
              g * inv_n * (-(yi / pi) + (1.0 - yi) / (1.0 - pi));
        }
      }
      if (yn->requires_grad) {
        yn->ensure_grad();
        for (std::size_t i = 0; i < yn->values.size(); ++i) {
          if (!valid[i]) continue;
          const double pi = pn->values[i];
          yn->grad[i] += g * inv_n * (std::log(1.0 - pi) - std::log(pi));
        }
      }
    };
  }
  return Tensor(std::move(node));
}

void AdamState::step(ParameterCollection& params) {
  step_ += 1;
  const double bias1 = 1.0 - std::pow(config_.beta1,
                                      static_cast<double>(step_));
  const double bias2 = 1.0 - std::pow(config_.beta2,
                                      static_cast<double>(step_));
  for (Parameter& p : params.items()) {
    if (!p.trainable) continue;
    if (!p.tensor.has_grad()) {
      throw OptimizerError("adam step: parameter '" + p.name +
                           "' has no gradient");
    }
    Moments& mom = moments_[p.name];
    if (mom.m.empty()) {
      mom.m.assign(p.tensor.size(), 0.0);
      mom.v.assign(p.tensor.size(), 0.0);
    }
    auto grad = p.tensor.grad();
    auto values = p.tensor.values_mut();

    std::vector<std::uint8_t> frozen;
    if (!p.frozen_rows.empty()) {
      frozen.assign(p.tensor.size(), 0);
      const std::size_t row_width =
          p.tensor.rank() >= 2 ? p.tensor.size() / p.tensor.shape()[0]
                               : p.tensor.size();
      for (std::size_t row : p.frozen_rows)
        for (std::size_t c = 0; c < row_width; ++c)
          frozen[row * row_width + c] = 1;
    }
    for (std::size_t i = 0; i < values.size(); ++i) {
      if (!frozen.empty() && frozen[i]) continue;
      const double g = grad[i];
      mom.m[i] = config_.beta1 * mom.m[i] + (1.0 - config_.beta1) * g;
      mom.v[i] = config_.beta2 * mom.v[i] + (1.0 - config_.beta2) * g * g;
      const double m_hat = mom.m[i] / bias1;
      const double v_hat = mom.v[i] / bias2;
      values[i] -=
          config_.learning_rate * m_hat / (std::sqrt(v_hat) + config_.epsilon);
    }
  }
}

void AdamState::save(const std::filesystem::path& path,
                     const ParameterCollection& params) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw FormatError("cannot open optimizer state for writing: " +
                      path.string());
  }
  out << "lgn-adam 1 " << step_ << '\n';
  for (const Parameter& p : params.items()) {
    auto it = moments_.find(p.name);
    if (it == moments_.end()) {
      for (std::size_t i = 0; i < 2 * p.tensor.size(); ++i)
        wire::write_f64(out, 0.0);
      continue;
    }
    for (double v : it->second.m) wire::write_f64(out, v);
    for (double v : it->second.v) wire::write_f64(out, v);
  }
}

void AdamState::load(const std::filesystem::path& path,
                     const ParameterCollection& params) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw FormatError("cannot open optimizer state: " + path.string());
  }
  std::string magic;
  int version = 0;
  std::size_t step = 0;
  in >> magic >> version >> step;
  in.ignore(1);
  if (magic != "lgn-adam" || version != 1) {
    throw FormatError("not an lgn optimizer state file: " + path.string());
  }
  step_ = step;
  moments_.clear();
  for (const Parameter& p : params.items()) {
    Moments mom;
    mom.m.resize(p.tensor.size());
    mom.v.resize(p.tensor.size());
    for (double& v : mom.m) {
      if (!wire::read_f64(in, v)) {
        throw FormatError("optimizer state truncated at '" + p.name +
                          "': " + path.string());
      }
    }
    for (double& v : mom.v) {
      if (!wire::read_f64(in, v)) {
        throw FormatError("optimizer state truncated at '" + p.name +
                          "': " + path.string());
      }
    }
    moments_.emplace(p.name, std::move(mom));
  }
}

void TrainConfig::validate() const {
  if (epochs == 0 || batch_size == 0) {
    throw ConfigError("train config requires epochs >= 1 and batch_size >= 1");
  }
  labels.validate();
}

namespace {

struct PreparedSample {
  TemporalMap map;
  std::vector<int> ids;
  Tensor labels;
  std::string video_id;
};

PreparedSample prepare_sample(const Sample& sample, const LgnModel& model,
                              const LabelConfig& labels) {
  const ModelConfig& cfg = model.config();
  try {
    PreparedSample prep;
    ClipFeatureSequence resampled = resample_clips(*sample.video, cfg.N);
    prep.map = pool_moment_features(resampled, cfg.pooling);
    prep.ids = model.encode(sample.annotation.tokens);
    Tensor field =
        iou_field(cfg.N, sample.annotation.span, sample.video->duration_s);
    prep.labels = label_field(field, prep.map.valid, labels);
    prep.video_id = sample.annotation.video_id;
    return prep;
  } catch (const Error& e) {
    throw IngestionError("sample for video '" + sample.annotation.video_id +
                         "' could not be ingested: " + e.what());
  }
}

}  // namespace

std::vector<EpochLog> train(
    const std::vector<Sample>& dataset, LgnModel& model,
    const TrainConfig& config,
    const std::optional<std::filesystem::path>& checkpoint_dir,
    std::size_t start_epoch,
    const std::function<void(const EpochLog&)>& on_epoch) {
  config.validate();
  if (dataset.empty()) {
    throw ValidationError("train requires a non-empty dataset");
  }
  if (checkpoint_dir.has_value()) {
    std::filesystem::create_directories(*checkpoint_dir);
  }
  std::vector<PreparedSample> prepared;
  prepared.reserve(dataset.size());
  for (const Sample& s : dataset)
    prepared.push_back(prepare_sample(s, model, config.labels));

  AdamConfig adam_cfg;
  adam_cfg.learning_rate = config.learning_rate;
  AdamState adam(adam_cfg);
  if (start_epoch > 0 && checkpoint_dir.has_value()) {
    auto state_path =
        *checkpoint_dir / ("epoch_" + std::to_string(start_epoch) + ".opt");
    if (std::filesystem::exists(state_path)) {
      adam.load(state_path, model.params());
    }
  }

  std::vector<EpochLog> logs;
  for (std::size_t epoch = start_epoch; epoch < config.epochs; ++epoch) {
    const auto started = std::chrono::steady_clock::now();

    std::vector<std::size_t> order(prepared.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    Rng shuffle_rng(mix_seed(config.seed, 0xa11ce5, epoch));
    shuffle_rng.shuffle(order);

    double loss_sum = 0.0;
    std::size_t cursor = 0;
    while (cursor < order.size()) {
      const std::size_t batch_end =
          std::min(cursor + config.batch_size, order.size());
      const double inv_batch =
          1.0 / static_cast<double>(batch_end - cursor);
      model.params().zero_grad();
      for (std::size_t i = cursor; i < batch_end; ++i) {
        const PreparedSample& sample = prepared[order[i]];
        Rng dropout_rng(mix_seed(config.seed, epoch, i));
        RunContext ctx{/*training=*/true, &dropout_rng};
        ForwardResult out = model.forward_from_map(sample.map, sample.ids, ctx);
        Tensor loss = masked_bce(out.scores, sample.labels, sample.map.valid);
        loss_sum += loss.item();
        backward(scale(loss, inv_batch));
      }
      adam.step(model.params());
      cursor = batch_end;
    }

    const auto finished = std::chrono::steady_clock::now();
    EpochLog log;
    log.epoch = epoch;
    log.mean_loss = loss_sum / static_cast<double>(prepared.size());
    log.wall_ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                      finished - started)
                      .count();
    logs.push_back(log);
    if (on_epoch) on_epoch(log);

    if (checkpoint_dir.has_value()) {
      const bool at_cadence = config.checkpoint_every > 0 &&
                              (epoch + 1) % config.checkpoint_every == 0;
      if (at_cadence) {
        std::string stem = "epoch_" + std::to_string(epoch + 1);
        save_checkpoint(*checkpoint_dir / (stem + ".ckpt"), model);
        adam.save(*checkpoint_dir / (stem + ".opt"), model.params());
      }
    }
  }
  if (checkpoint_dir.has_value()) {
    save_checkpoint(*checkpoint_dir / "final.ckpt", model);
    adam.save(*checkpoint_dir / "final.opt", model.params());
  }
  return logs;
}

}  // namespace lgn

#pragma once

#include <filesystem>
#include <optional>
#include <unordered_map>

#include "lgn/dataset.hpp"
#include "lgn/model.hpp"

namespace lgn {

// Thresholds of the min-max label shift. 0 <= t_min < t_max <= 1.
struct LabelConfig {
  double t_min = 0.0;
  double t_max = 0.5;
  void validate() const;
};

// Three-branch soft label: 0 below t_min, 1 above t_max, linear between.
double soft_label(double overlap, const LabelConfig& cfg);

// soft_label applied to every valid cell of an IoU field; invalid cells 0.
Tensor label_field(const Tensor& iou_field,
                   const std::vector<std::uint8_t>& valid,
                   const LabelConfig& cfg);

// Mean binary cross entropy over valid cells only. Scores must lie strictly
// inside (0, 1) on valid cells (the sigmoid head guarantees it).
Tensor masked_bce(const Tensor& scores, const Tensor& labels,
                  const std::vector<std::uint8_t>& valid);

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

// Bias-corrected Adam over a parameter collection. Frozen parameters and
// frozen rows are never touched.
class AdamState {
 public:
  explicit AdamState(AdamConfig config) : config_(config) {}

  void step(ParameterCollection& params);
  std::size_t step_count() const { return step_; }
  const AdamConfig& config() const { return config_; }

  // Sidecar persistence so a resumed run continues the exact trajectory.
  void save(const std::filesystem::path& path,
            const ParameterCollection& params) const;
  void load(const std::filesystem::path& path,
            const ParameterCollection& params);

 private:
  struct Moments {
    std::vector<double> m, v;
  };
  AdamConfig config_;
  std::size_t step_ = 0;
  std::unordered_map<std::string, Moments> moments_;
};

struct TrainConfig {
  std::size_t epochs = 30;
  std::size_t batch_size = 16;
  double learning_rate = 1e-3;
  std::uint64_t seed = 0;
  std::size_t checkpoint_every = 0;  // 0: only the final checkpoint
  LabelConfig labels;
  void validate() const;
};

struct EpochLog {
  std::size_t epoch = 0;
  double mean_loss = 0.0;
  std::int64_t wall_ms = 0;
};

// Per epoch: seeded shuffle, forward, Eq-4 labels from the IoU field,
// masked BCE, backward, Adam step per batch. Writes checkpoints under
// checkpoint_dir when given: "epoch_<k>.ckpt" plus "epoch_<k>.opt" at the
// cadence, and "final.ckpt"/"final.opt" at the end. Resuming at
// start_epoch = k expects the model loaded from epoch_<k>.ckpt and picks up
// epoch_<k>.opt when present; shuffle and dropout streams are derived from
// (seed, epoch), so the continued run reproduces the original bit for bit.
std::vector<EpochLog> train(
    const std::vector<Sample>& dataset, LgnModel& model,
    const TrainConfig& config,
    const std::optional<std::filesystem::path>& checkpoint_dir = std::nullopt,
    std::size_t start_epoch = 0,
    const std::function<void(const EpochLog&)>& on_epoch = {});

}  // namespace lgn

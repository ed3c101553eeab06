#pragma once

#include <filesystem>
#include <optional>

#include "lgn/model.hpp"
#include "lgn/training.hpp"

namespace lgn {

struct MetricSpec {
  std::vector<std::size_t> n_values{1, 5};
  std::vector<double> m_values{0.3, 0.5, 0.7};
  // NMS threshold for ranking. Unset: off for n = 1, 0.5 for n > 1.
  std::optional<double> nms_iou;
  // The hit condition is IoU >= m; set open_threshold for strict >.
  bool open_threshold = false;
  void validate() const;
};

struct MetricReport {
  struct Entry {
    std::size_t n = 0;
    double m = 0.0;
    double percent = 0.0;
  };
  std::vector<Entry> entries;
  std::size_t query_count = 0;
  std::string config_fingerprint;

  double at(std::size_t n, double m) const;
  std::string table() const;  // aligned plain-text rendering
};

// True iff one of the first min(n, |ranked|) spans overlaps gt at the
// threshold. An empty ranking is a miss, not an error.
bool query_hit(const std::vector<RankedProposal>& ranked,
               const MomentSpan& gt, std::size_t n, double m,
               bool open_threshold = false);

// Per-query diagnostics for the optional CSV dump.
struct QueryOutcome {
  std::size_t index = 0;
  std::string video_id;
  std::vector<RankedProposal> top;
  std::vector<double> ious;
};

MetricReport evaluate(const std::vector<Sample>& dataset,
                      const LgnModel& model, const MetricSpec& spec,
                      std::vector<QueryOutcome>* outcomes = nullptr);

void write_outcomes_csv(const std::filesystem::path& path,
                        const std::vector<QueryOutcome>& outcomes);

// The four rows of the ablation table: baseline, early only, late only,
// full. Each is trained per seed and scored at Rank1@IoU0.5; the delta
// column is the median improvement over the baseline row.
struct AblationRow {
  std::string name;
  std::vector<double> per_seed;  // Rank1@IoU0.5, one entry per seed
  double median = 0.0;
  double delta = 0.0;
};

std::vector<AblationRow> ablation_report(
    const std::vector<Sample>& train_set, const std::vector<Sample>& test_set,
    const ModelConfig& base_config, const TrainConfig& train_config,
    const std::vector<std::uint64_t>& seeds);

std::string ablation_table(const std::vector<AblationRow>& rows);

}  // namespace lgn

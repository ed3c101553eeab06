#pragma once

#include <filesystem>

#include "lgn/dataset.hpp"

namespace lgn {

// Easy: one concept segment per video, named directly by the query.
// Compositional: the query names an ordered pair of concepts; the video
// contains "a then b", "b then a", and each concept alone. Pooled cell
// features are order-invariant, so only their combination under the query
// identifies the span, which forces language conditioning.
enum class Hardness { Easy, Compositional };

std::string hardness_name(Hardness h);
Hardness hardness_from_name(const std::string& name);

struct SyntheticConfig {
  std::size_t n_videos = 200;
  std::size_t clips_per_video = 16;
  std::size_t d_v = 32;
  double duration_s = 32.0;
  std::size_t concepts = 8;
  std::size_t vocab_per_concept = 2;
  double noise_sigma = 0.3;
  std::size_t span_min = 2;  // span length range, in clips
  std::size_t span_max = 8;
  Hardness hardness = Hardness::Easy;
  std::uint64_t seed = 0;
  void validate() const;
};

// Writes features/, annotations.jsonl, manifest.json and synth.json under
// out_dir. Spans are generated on the cell grid, videos are split
// 50/25/25 into train/val/test by index, and the whole directory is a pure
// function of the config.
void generate(const SyntheticConfig& cfg,
              const std::filesystem::path& out_dir);

// Rank1 accuracy of a nearest-prototype scorer that reads the query's
// concept, classifies each clip against the regenerated prototypes, and
// returns the longest run of matching clips. Reaches 100% at IoU 1.0 on
// noiseless easy data; used to certify benchmark attainability.
double oracle_rank1(const SyntheticConfig& cfg,
                    const std::vector<Sample>& samples, double iou_threshold);

}  // namespace lgn

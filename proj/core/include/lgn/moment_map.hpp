#pragma once

#include <string>
#include <utility>
#include <vector>

#include "lgn/tensor.hpp"

namespace lgn {

// Per-clip visual features for one video: a [T x d_v] matrix plus timing.
struct ClipFeatureSequence {
  std::string video_id;
  Tensor features;  // [T, d_v]
  double duration_s = 0.0;

  std::size_t clip_count() const { return features.shape()[0]; }
  std::size_t feature_width() const { return features.shape()[1]; }
  void validate() const;
};

// Closed-open time interval in seconds; end must exceed start.
struct MomentSpan {
  double start_s = 0.0;
  double end_s = 0.0;

  MomentSpan() = default;
  MomentSpan(double start, double end);
  double length() const { return end_s - start_s; }
};

struct AnnotationRecord {
  std::string video_id;
  std::vector<std::string> tokens;
  MomentSpan span;
};

enum class PoolingMode { Max, Mean };

// N x N grid over (start clip, end clip). Cell (a, b) is valid iff a <= b
// and covers [a*tau, (b+1)*tau] with tau = duration / N. Invalid cells hold
// exactly zero features.
struct TemporalMap {
  std::size_t N = 0;
  std::vector<std::uint8_t> valid;  // N*N, row-major (a, b)
  Tensor cell_features;             // [d, N, N]

  bool is_valid(std::size_t a, std::size_t b) const {
    return a < N && b < N && valid[a * N + b];
  }
  std::size_t valid_count() const;
};

std::vector<std::uint8_t> build_validity_mask(std::size_t N);
// [N, N] tensor holding 1 on valid cells, 0 elsewhere.
Tensor validity_tensor(std::size_t N);

ClipFeatureSequence resample_clips(const ClipFeatureSequence& seq,
                                   std::size_t N);

MomentSpan cell_to_span(std::size_t a, std::size_t b, std::size_t N,
                        double duration_s);

std::pair<std::size_t, std::size_t> span_to_best_cell(const MomentSpan& span,
                                                      std::size_t N,
                                                      double duration_s);

double temporal_iou(const MomentSpan& x, const MomentSpan& y);

// Requires T == N. Cell (a, b) pools clip rows a..b inclusive.
TemporalMap pool_moment_features(const ClipFeatureSequence& seq,
                                 PoolingMode mode);

// o(a, b) = temporal IoU of cell (a, b) against gt; zero on invalid cells.
Tensor iou_field(std::size_t N, const MomentSpan& gt, double duration_s);

}  // namespace lgn

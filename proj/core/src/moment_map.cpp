#include "lgn/moment_map.hpp"

#include <algorithm>
#include <cmath>

namespace lgn {

void ClipFeatureSequence::validate() const {
  if (features.rank() != 2 || features.shape()[0] == 0) {
    throw ValidationError("clip features for '" + video_id +
                          "' must be a [T x d_v] matrix with T >= 1, got " +
                          shape_str(features.shape()));
  }
  if (!(duration_s > 0.0)) {
    throw ValidationError("video '" + video_id +
                          "' must have positive duration");
  }
  for (double v : features.values()) {
    if (!std::isfinite(v)) {
      throw ValidationError("non-finite feature value in video '" + video_id +
                            "'");
    }
  }
}

MomentSpan::MomentSpan(double start, double end) : start_s(start), end_s(end) {
  if (!(end > start) || start < 0.0 || !std::isfinite(start) ||
      !std::isfinite(end)) {
    throw InvalidSpanError("degenerate span [" + std::to_string(start) + ", " +
                           std::to_string(end) + ")");
  }
}

std::size_t TemporalMap::valid_count() const {
  std::size_t n = 0;
  for (std::uint8_t v : valid) n += v;
  return n;
}

std::vector<std::uint8_t> build_validity_mask(std::size_t N) {
  std::vector<std::uint8_t> mask(N * N, 0);
  for (std::size_t a = 0; a < N; ++a)
    for (std::size_t b = a; b < N; ++b) mask[a * N + b] = 1;
  return mask;
}

Tensor validity_tensor(std::size_t N) {
  auto mask = build_validity_mask(N);
  std::vector<double> v(mask.begin(), mask.end());
  return Tensor({N, N}, std::move(v));
}

ClipFeatureSequence resample_clips(const ClipFeatureSequence& seq,
                                   std::size_t N) {
  seq.validate();
  if (N == 0) {
    throw ConfigError("resample_clips requires N >= 1");
  }
  const std::size_t T = seq.clip_count();
  const std::size_t d = seq.feature_width();
  if (T == N) {
    return seq;
  }
  auto src = seq.features.values();
  std::vector<double> out(N * d, 0.0);
  for (std::size_t i = 0; i < N; ++i) {
    // contiguous group [lo, hi); empty groups (T < N) take the nearest row
    std::size_t lo = i * T / N;
    std::size_t hi = (i + 1) * T / N;
    if (hi <= lo) {
      std::size_t pick = std::min(lo, T - 1);
      for (std::size_t c = 0; c < d; ++c) out[i * d + c] = src[pick * d + c];
      continue;
    }
    for (std::size_t r = lo; r < hi; ++r)
      for (std::size_t c = 0; c < d; ++c) out[i * d + c] += src[r * d + c];
    const double inv = 1.0 / static_cast<double>(hi - lo);
    for (std::size_t c = 0; c < d; ++c) out[i * d + c] *= inv;
  }
  ClipFeatureSequence result;
  result.video_id = seq.video_id;
  result.duration_s = seq.duration_s;
  result.features = Tensor({N, d}, std::move(out));
  return result;
}

MomentSpan cell_to_span(std::size_t a, std::size_t b, std::size_t N,
                        double duration_s) {
  if (a > b || b >= N) {
    throw InvalidCellError("cell (" + std::to_string(a) + ", " +
                           std::to_string(b) + ") is not a valid cell of an " +
                           std::to_string(N) + "-clip map");
  }
  const double tau = duration_s / static_cast<double>(N);
  return MomentSpan(static_cast<double>(a) * tau,
                    static_cast<double>(b + 1) * tau);
}

double temporal_iou(const MomentSpan& x, const MomentSpan& y) {
  if (!(x.end_s > x.start_s) || !(y.end_s > y.start_s)) {
    throw InvalidSpanError("temporal_iou requires non-degenerate spans");
  }
  const double inter = std::max(
      0.0, std::min(x.end_s, y.end_s) - std::max(x.start_s, y.start_s));
  const double uni =
      std::max(x.end_s, y.end_s) - std::min(x.start_s, y.start_s);
  return inter / uni;
}

std::pair<std::size_t, std::size_t> span_to_best_cell(const MomentSpan& span,
                                                      std::size_t N,
                                                      double duration_s) {
  if (!(span.end_s > span.start_s)) {
    throw InvalidSpanError("span_to_best_cell requires a non-degenerate span");
  }
  if (span.start_s < 0.0 || span.end_s > duration_s) {
    throw InvalidSpanError("span [" + std::to_string(span.start_s) + ", " +
                           std::to_string(span.end_s) +
                           ") lies outside the video of duration " +
                           std::to_string(duration_s));
  }
  double best = -1.0;
  std::pair<std::size_t, std::size_t> best_cell{0, 0};
  for (std::size_t a = 0; a < N; ++a) {
    for (std::size_t b = a; b < N; ++b) {
      double iou = temporal_iou(cell_to_span(a, b, N, duration_s), span);
      if (iou > best) {
        best = iou;
        best_cell = {a, b};
      }
    }
  }
  return best_cell;
}

TemporalMap pool_moment_features(const ClipFeatureSequence& seq,
                                 PoolingMode mode) {
  seq.validate();
  const std::size_t N = seq.clip_count();
  const std::size_t d = seq.feature_width();
  auto src = seq.features.values();

  TemporalMap map;
  map.N = N;
  map.valid = build_validity_mask(N);
  std::vector<double> cells(d * N * N, 0.0);
  // grow each row's pool from (a, a) to (a, N-1); O(N^2 d) total
  std::vector<double> pool(d);
  for (std::size_t a = 0; a < N; ++a) {
    for (std::size_t c = 0; c < d; ++c) pool[c] = src[a * d + c];
    for (std::size_t b = a; b < N; ++b) {
      if (b > a) {
        if (mode == PoolingMode::Max) {
          for (std::size_t c = 0; c < d; ++c)
            pool[c] = std::max(pool[c], src[b * d + c]);
        } else {
          for (std::size_t c = 0; c < d; ++c) pool[c] += src[b * d + c];
        }
      }
      if (mode == PoolingMode::Mean) {
        const double inv = 1.0 / static_cast<double>(b - a + 1);
        for (std::size_t c = 0; c < d; ++c)
          cells[(c * N + a) * N + b] = pool[c] * inv;
      } else {
        for (std::size_t c = 0; c < d; ++c)
          cells[(c * N + a) * N + b] = pool[c];
      }
    }
  }
  map.cell_features = Tensor({d, N, N}, std::move(cells));
  return map;
}

Tensor iou_field(std::size_t N, const MomentSpan& gt, double duration_s) {
  if (gt.start_s < 0.0 || gt.end_s > duration_s) {
    throw InvalidSpanError("ground-truth span lies outside the video");
  }
  std::vector<double> field(N * N, 0.0);
  for (std::size_t a = 0; a < N; ++a)
    for (std::size_t b = a; b < N; ++b)
      field[a * N + b] = temporal_iou(cell_to_span(a, b, N, duration_s), gt);
  return Tensor({N, N}, std::move(field));
}

}  // namespace lgn

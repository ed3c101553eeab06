#include <cmath>

#include "doctest.h"
#include "lgn/moment_map.hpp"
#include "lgn/rng.hpp"

using namespace lgn;

namespace {

ClipFeatureSequence make_sequence(std::vector<std::vector<double>> rows,
                                  double duration_s) {
  ClipFeatureSequence seq;
  seq.video_id = "test";
  seq.duration_s = duration_s;
  const std::size_t t = rows.size();
  const std::size_t d = rows[0].size();
  std::vector<double> flat;
  flat.reserve(t * d);
  for (const auto& row : rows)
    flat.insert(flat.end(), row.begin(), row.end());
  seq.features = Tensor({t, d}, std::move(flat));
  return seq;
}

MomentSpan random_span(Rng& rng, double duration) {
  double a = rng.uniform(0.0, duration * 0.95);
  double b = rng.uniform(a + 1e-3, duration);
  return MomentSpan(a, b);
}

}  // namespace

TEST_SUITE_BEGIN("moment_map");

TEST_CASE("resample_clips is the identity when T equals N") {
  auto seq = make_sequence({{1, 2}, {3, 4}, {5, 6}}, 6.0);
  auto out = resample_clips(seq, 3);
  for (std::size_t i = 0; i < seq.features.size(); ++i) {
    CHECK(out.features.values()[i] == seq.features.values()[i]);
  }
}

TEST_CASE("resample_clips averages contiguous groups") {
  auto seq = make_sequence({{0, 0}, {2, 4}, {10, 20}, {30, 40}}, 8.0);
  auto out = resample_clips(seq, 2);
  CHECK(out.features.at({0, 0}) == doctest::Approx(1.0));
  CHECK(out.features.at({0, 1}) == doctest::Approx(2.0));
  CHECK(out.features.at({1, 0}) == doctest::Approx(20.0));
  CHECK(out.features.at({1, 1}) == doctest::Approx(30.0));
}

TEST_CASE("resample_clips keeps constant features constant") {
  auto seq = make_sequence({{7, 7}, {7, 7}, {7, 7}, {7, 7}, {7, 7}}, 10.0);
  auto out = resample_clips(seq, 3);
  for (double v : out.features.values()) CHECK(v == doctest::Approx(7.0));
}

TEST_CASE("resample_clips with T < N duplicates boundary rows") {
  auto seq = make_sequence({{1, 1}, {2, 2}}, 4.0);
  auto out = resample_clips(seq, 4);
  CHECK(out.clip_count() == 4);
  // every output row equals one of the input rows
  for (std::size_t i = 0; i < 4; ++i) {
    double v = out.features.at({i, 0});
    CHECK((v == 1.0 || v == 2.0));
  }
  // deterministic: repeated call gives the identical assignment
  auto again = resample_clips(seq, 4);
  for (std::size_t i = 0; i < out.features.size(); ++i) {
    CHECK(out.features.values()[i] == again.features.values()[i]);
  }
}

TEST_CASE("cell_to_span covers the full video at (0, N-1)") {
  MomentSpan span = cell_to_span(0, 7, 8, 16.0);
  CHECK(span.start_s == doctest::Approx(0.0));
  CHECK(span.end_s == doctest::Approx(16.0));
}

TEST_CASE("cell_to_span hand oracle with tau = 2") {
  MomentSpan span = cell_to_span(2, 4, 8, 16.0);
  CHECK(span.start_s == doctest::Approx(4.0));
  CHECK(span.end_s == doctest::Approx(10.0));
}

TEST_CASE("cell_to_span rejects inverted or out-of-range cells") {
  CHECK_THROWS_AS(cell_to_span(3, 1, 8, 16.0), InvalidCellError);
  CHECK_THROWS_AS(cell_to_span(1, 8, 8, 16.0), InvalidCellError);
}

TEST_CASE("temporal_iou basics") {
  MomentSpan a(0.0, 4.0), b(2.0, 6.0);
  CHECK(temporal_iou(a, a) == doctest::Approx(1.0));
  CHECK(temporal_iou(MomentSpan(0, 1), MomentSpan(2, 3)) ==
        doctest::Approx(0.0));
  CHECK(temporal_iou(a, b) == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
}

TEST_CASE("temporal_iou rejects degenerate spans") {
  CHECK_THROWS_AS(MomentSpan(3.0, 3.0), InvalidSpanError);
  CHECK_THROWS_AS(MomentSpan(5.0, 2.0), InvalidSpanError);
}

TEST_CASE("temporal_iou symmetry and bounds on 1000 random spans") {
  Rng rng(77);
  for (int trial = 0; trial < 1000; ++trial) {
    MomentSpan x = random_span(rng, 30.0);
    MomentSpan y = random_span(rng, 30.0);
    double xy = temporal_iou(x, y);
    double yx = temporal_iou(y, x);
    CHECK(xy == yx);
    CHECK(xy >= 0.0);
    CHECK(xy <= 1.0);
    CHECK(temporal_iou(x, x) == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("span_to_best_cell returns the exact cell for grid spans") {
  for (std::size_t a = 0; a < 6; ++a) {
    for (std::size_t b = a; b < 6; ++b) {
      auto span = cell_to_span(a, b, 6, 12.0);
      auto cell = span_to_best_cell(span, 6, 12.0);
      CHECK(cell.first == a);
      CHECK(cell.second == b);
    }
  }
}

TEST_CASE("span_to_best_cell matches brute force on an off-grid span") {
  MomentSpan span(3.9, 10.1);
  auto cell = span_to_best_cell(span, 8, 16.0);

  double best = -1.0;
  std::pair<std::size_t, std::size_t> expect{0, 0};
  for (std::size_t a = 0; a < 8; ++a) {
    for (std::size_t b = a; b < 8; ++b) {
      double iou = temporal_iou(cell_to_span(a, b, 8, 16.0), span);
      if (iou > best) {
        best = iou;
        expect = {a, b};
      }
    }
  }
  CHECK(cell == expect);
  CHECK(cell.first == 2);
  CHECK(cell.second == 4);
}

TEST_CASE("span_to_best_cell of the whole video is (0, N-1)") {
  auto cell = span_to_best_cell(MomentSpan(0.0, 16.0), 8, 16.0);
  CHECK(cell.first == 0);
  CHECK(cell.second == 7);
}

TEST_CASE("pool_moment_features singleton cells carry the clip feature") {
  auto seq = make_sequence({{1, 5}, {3, 2}}, 4.0);
  TemporalMap map = pool_moment_features(seq, PoolingMode::Max);
  CHECK(map.cell_features.at({0, 0, 0}) == 1.0);
  CHECK(map.cell_features.at({1, 0, 0}) == 5.0);
  CHECK(map.cell_features.at({0, 1, 1}) == 3.0);
  CHECK(map.cell_features.at({1, 1, 1}) == 2.0);
}

TEST_CASE("pool_moment_features max mode takes columnwise maxima") {
  auto seq = make_sequence({{1, 5}, {3, 2}}, 4.0);
  TemporalMap map = pool_moment_features(seq, PoolingMode::Max);
  CHECK(map.cell_features.at({0, 0, 1}) == 3.0);
  CHECK(map.cell_features.at({1, 0, 1}) == 5.0);
}

TEST_CASE("pool_moment_features mean mode averages the span") {
  auto seq = make_sequence({{1, 5}, {3, 2}}, 4.0);
  TemporalMap map = pool_moment_features(seq, PoolingMode::Mean);
  CHECK(map.cell_features.at({0, 0, 1}) == doctest::Approx(2.0));
  CHECK(map.cell_features.at({1, 0, 1}) == doctest::Approx(3.5));
}

TEST_CASE("pool_moment_features zeroes invalid cells") {
  auto seq = make_sequence({{1, 5}, {3, 2}, {9, 9}}, 6.0);
  TemporalMap map = pool_moment_features(seq, PoolingMode::Max);
  for (std::size_t c = 0; c < 2; ++c)
    for (std::size_t a = 0; a < 3; ++a)
      for (std::size_t b = 0; b < a; ++b)
        CHECK(map.cell_features.at({c, a, b}) == 0.0);
}

TEST_CASE("max pooling is monotone under span growth") {
  Rng rng(5);
  const std::size_t n = 6, d = 4;
  std::vector<std::vector<double>> rows(n, std::vector<double>(d));
  for (auto& row : rows)
    for (double& v : row) v = rng.uniform(-3.0, 3.0);
  TemporalMap map = pool_moment_features(make_sequence(rows, 12.0),
                                         PoolingMode::Max);
  for (std::size_t a = 0; a < n; ++a) {
    for (std::size_t b = a; b + 1 < n; ++b) {
      for (std::size_t c = 0; c < d; ++c) {
        CHECK(map.cell_features.at({c, a, b + 1}) >=
              map.cell_features.at({c, a, b}));
        if (a > 0) {
          CHECK(map.cell_features.at({c, a - 1, b}) >=
                map.cell_features.at({c, a, b}));
        }
      }
    }
  }
}

TEST_CASE("validity mask holds N(N+1)/2 cells for N in 1..64") {
  for (std::size_t n = 1; n <= 64; ++n) {
    auto mask = build_validity_mask(n);
    std::size_t count = 0;
    for (auto v : mask) count += v;
    CHECK(count == n * (n + 1) / 2);
  }
}

TEST_CASE("iou_field puts 1.0 at the full-video cell for full-video gt") {
  Tensor field = iou_field(4, MomentSpan(0.0, 8.0), 8.0);
  CHECK(field.at({0, 3}) == doctest::Approx(1.0));
}

TEST_CASE("iou_field stays in [0,1] and is zero on invalid cells") {
  Rng rng(9);
  for (int trial = 0; trial < 25; ++trial) {
    MomentSpan gt = random_span(rng, 8.0);
    Tensor field = iou_field(4, gt, 8.0);
    for (std::size_t a = 0; a < 4; ++a) {
      for (std::size_t b = 0; b < 4; ++b) {
        double v = field.at({a, b});
        if (b < a) {
          CHECK(v == 0.0);
        } else {
          CHECK(v >= 0.0);
          CHECK(v <= 1.0);
        }
      }
    }
  }
}

TEST_CASE("iou_field matches brute force on N = 4") {
  MomentSpan gt(2.0, 6.0);
  Tensor field = iou_field(4, gt, 8.0);
  for (std::size_t a = 0; a < 4; ++a) {
    for (std::size_t b = a; b < 4; ++b) {
      double expect = temporal_iou(cell_to_span(a, b, 4, 8.0), gt);
      CHECK(field.at({a, b}) == doctest::Approx(expect).epsilon(1e-12));
    }
  }
}

TEST_CASE("iou_field attains its max at span_to_best_cell") {
  Rng rng(33);
  for (int trial = 0; trial < 100; ++trial) {
    MomentSpan gt = random_span(rng, 16.0);
    Tensor field = iou_field(8, gt, 16.0);
    auto best = span_to_best_cell(gt, 8, 16.0);
    double best_value = field.at({best.first, best.second});
    for (std::size_t a = 0; a < 8; ++a)
      for (std::size_t b = a; b < 8; ++b)
        CHECK(field.at({a, b}) <= best_value + 1e-12);
  }
}

TEST_SUITE_END();

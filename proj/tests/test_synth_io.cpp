#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "lgn/synth.hpp"

using namespace lgn;

namespace {

namespace fs = std::filesystem;

fs::path fresh_dir(const char* name) {
  auto dir = fs::temp_directory_path() / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

SyntheticConfig base_config() {
  SyntheticConfig cfg;
  cfg.n_videos = 12;
  cfg.clips_per_video = 16;
  cfg.d_v = 8;
  cfg.duration_s = 32.0;
  cfg.concepts = 4;
  cfg.vocab_per_concept = 2;
  cfg.noise_sigma = 0.2;
  cfg.span_min = 2;
  cfg.span_max = 6;
  cfg.seed = 13;
  return cfg;
}

std::vector<char> slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return std::vector<char>((std::istreambuf_iterator<char>(in)),
                           std::istreambuf_iterator<char>());
}

}  // namespace

TEST_SUITE_BEGIN("synth_io");

TEST_CASE("noiseless easy videos hold the prototype rows exactly") {
  SyntheticConfig cfg = base_config();
  cfg.noise_sigma = 0.0;
  auto dir = fresh_dir("lgn_synth_noiseless");
  generate(cfg, dir);
  auto samples = load_dataset(dir / "manifest.json");
  REQUIRE(!samples.empty());
  for (const Sample& s : samples) {
    // every in-span clip equals every other in-span clip bit-for-bit
    auto cell = span_to_best_cell(s.annotation.span, cfg.clips_per_video,
                                  s.video->duration_s);
    auto feats = s.video->features.values();
    const std::size_t d = s.video->feature_width();
    for (std::size_t t = cell.first + 1; t <= cell.second; ++t) {
      for (std::size_t c = 0; c < d; ++c) {
        CHECK(feats[t * d + c] == feats[cell.first * d + c]);
      }
    }
  }
}

TEST_CASE("generated spans stay within the configured length range") {
  SyntheticConfig cfg = base_config();
  auto dir = fresh_dir("lgn_synth_range");
  generate(cfg, dir);
  auto samples = load_dataset(dir / "manifest.json");
  const double tau = cfg.duration_s / static_cast<double>(cfg.clips_per_video);
  for (const Sample& s : samples) {
    double len_clips = s.annotation.span.length() / tau;
    CHECK(len_clips >= 1.0 - 1e-9);
    CHECK(len_clips <= static_cast<double>(cfg.clips_per_video) + 1e-9);
  }
}

TEST_CASE("every generated annotation sits exactly on the cell grid") {
  for (Hardness hardness : {Hardness::Easy, Hardness::Compositional}) {
    SyntheticConfig cfg = base_config();
    cfg.hardness = hardness;
    cfg.span_max = 4;  // compositional budget: 6 * (span_max / 2) <= N
    auto dir = fresh_dir("lgn_synth_grid");
    generate(cfg, dir);
    auto samples = load_dataset(dir / "manifest.json");
    for (const Sample& s : samples) {
      auto cell = span_to_best_cell(s.annotation.span, cfg.clips_per_video,
                                    s.video->duration_s);
      MomentSpan snapped = cell_to_span(cell.first, cell.second,
                                        cfg.clips_per_video,
                                        s.video->duration_s);
      CHECK(temporal_iou(snapped, s.annotation.span) ==
            doctest::Approx(1.0).epsilon(1e-12));
    }
    fs::remove_all(dir);
  }
}

TEST_CASE("generation is byte-identical for a fixed config and seed") {
  SyntheticConfig cfg = base_config();
  auto dir_a = fresh_dir("lgn_synth_det_a");
  auto dir_b = fresh_dir("lgn_synth_det_b");
  generate(cfg, dir_a);
  generate(cfg, dir_b);
  for (auto& entry : fs::recursive_directory_iterator(dir_a)) {
    if (!entry.is_regular_file()) continue;
    auto rel = fs::relative(entry.path(), dir_a);
    CAPTURE(rel.string());
    CHECK(slurp(entry.path()) == slurp(dir_b / rel));
  }
  fs::remove_all(dir_a);
  fs::remove_all(dir_b);
}

TEST_CASE("feature files round-trip bit-identically") {
  SyntheticConfig cfg = base_config();
  auto dir = fresh_dir("lgn_synth_roundtrip");
  generate(cfg, dir);
  auto samples = load_dataset(dir / "manifest.json");
  // write one loaded sequence back out and compare payloads
  const auto& video = *samples.front().video;
  write_feature_file(dir / "rewrite.lgnf", video);
  ClipFeatureSequence again = read_feature_file(dir / "rewrite.lgnf");
  REQUIRE(again.features.shape() == video.features.shape());
  for (std::size_t i = 0; i < video.features.size(); ++i) {
    CHECK(again.features.values()[i] == video.features.values()[i]);
  }
  CHECK(again.duration_s == video.duration_s);
  fs::remove_all(dir);
}

TEST_CASE("the loader rejects malformed feature files") {
  auto dir = fresh_dir("lgn_synth_malformed");
  // bad magic
  {
    std::ofstream out(dir / "bad_magic.lgnf", std::ios::binary);
    out << "NOPE" << std::string(16, '\0');
  }
  CHECK_THROWS_WITH_AS(read_feature_file(dir / "bad_magic.lgnf"),
                       doctest::Contains("magic"), FormatError);

  // truncated payload: header declares 4x4 floats, payload holds 3
  {
    std::ofstream out(dir / "short.lgnf", std::ios::binary);
    out << "LGNF";
    auto u32 = [&out](std::uint32_t v) {
      char b[4];
      for (int i = 0; i < 4; ++i) b[i] = static_cast<char>((v >> (8 * i)));
      out.write(b, 4);
    };
    u32(1);
    u32(4);
    u32(4);
    u32(8000);
    out << std::string(12, '\0');
  }
  CHECK_THROWS_WITH_AS(read_feature_file(dir / "short.lgnf"),
                       doctest::Contains("shorter"), FormatError);

  // oversized payload
  {
    std::ofstream out(dir / "long.lgnf", std::ios::binary);
    out << "LGNF";
    auto u32 = [&out](std::uint32_t v) {
      char b[4];
      for (int i = 0; i < 4; ++i) b[i] = static_cast<char>((v >> (8 * i)));
      out.write(b, 4);
    };
    u32(1);
    u32(1);
    u32(2);
    u32(8000);
    out << std::string(12, '\0');
  }
  CHECK_THROWS_WITH_AS(read_feature_file(dir / "long.lgnf"),
                       doctest::Contains("longer"), FormatError);
  fs::remove_all(dir);
}

TEST_CASE("annotations referencing unknown videos are resolution errors") {
  SyntheticConfig cfg = base_config();
  cfg.n_videos = 4;
  auto dir = fresh_dir("lgn_synth_resolution");
  generate(cfg, dir);
  {
    std::ofstream out(dir / "annotations.jsonl", std::ios::app);
    out << R"({"video_id":"ghost","tokens":["find"],"start_s":0,"end_s":2})"
        << '\n';
  }
  CHECK_THROWS_WITH_AS(load_dataset(dir / "manifest.json"),
                       doctest::Contains("ghost"), ResolutionError);
  fs::remove_all(dir);
}

TEST_CASE("spans outside the video duration are validation errors") {
  SyntheticConfig cfg = base_config();
  cfg.n_videos = 4;
  auto dir = fresh_dir("lgn_synth_outrange");
  generate(cfg, dir);
  {
    std::ofstream out(dir / "annotations.jsonl", std::ios::app);
    out << R"({"video_id":"v0000","tokens":["find"],"start_s":1,"end_s":999})"
        << '\n';
  }
  CHECK_THROWS_AS(load_dataset(dir / "manifest.json"), ValidationError);
  fs::remove_all(dir);
}

TEST_CASE("dataset_stats on a hand-built fixture") {
  auto dir = fresh_dir("lgn_stats_fixture");
  fs::create_directories(dir / "features");
  // one 6-token query on one video; two more queries on a second video
  ClipFeatureSequence v0;
  v0.video_id = "v0";
  v0.duration_s = 10.0;
  v0.features = Tensor::full({4, 2}, 0.5);
  write_feature_file(dir / "features" / "v0.lgnf", v0);
  ClipFeatureSequence v1 = v0;
  v1.video_id = "v1";
  write_feature_file(dir / "features" / "v1.lgnf", v1);

  std::vector<AnnotationRecord> annotations;
  annotations.push_back(
      {"v0", {"a", "b", "c", "d", "e", "f"}, MomentSpan(0.0, 4.0)});
  annotations.push_back({"v1", {"a", "b"}, MomentSpan(0.0, 8.0)});
  annotations.push_back({"v1", {"a", "b", "c", "d"}, MomentSpan(1.0, 5.0)});
  write_annotations(dir / "annotations.jsonl", annotations);

  DatasetManifest manifest;
  manifest.annotations = "annotations.jsonl";
  manifest.videos.push_back({"v0", "features/v0.lgnf", Split::Train});
  manifest.videos.push_back({"v1", "features/v1.lgnf", Split::Train});
  manifest.write(dir / "manifest.json");

  DatasetStats stats = dataset_stats(dir / "manifest.json");
  CHECK(stats.annotation_count == 3);
  CHECK(stats.video_count == 2);
  CHECK(stats.mean_words_per_query == doctest::Approx(4.0));
  CHECK(stats.mean_moments_per_video == doctest::Approx(1.5));
  CHECK(stats.mean_moment_duration_s == doctest::Approx(16.0 / 3.0));
  fs::remove_all(dir);
}

TEST_CASE("single-annotation stats") {
  auto dir = fresh_dir("lgn_stats_single");
  fs::create_directories(dir / "features");
  ClipFeatureSequence v0;
  v0.video_id = "v0";
  v0.duration_s = 10.0;
  v0.features = Tensor::full({4, 2}, 0.5);
  write_feature_file(dir / "features" / "v0.lgnf", v0);
  write_annotations(dir / "annotations.jsonl",
                    {{"v0",
                      {"one", "two", "three", "four", "five", "six"},
                      MomentSpan(0.0, 6.0)}});
  DatasetManifest manifest;
  manifest.annotations = "annotations.jsonl";
  manifest.videos.push_back({"v0", "features/v0.lgnf", Split::Train});
  manifest.write(dir / "manifest.json");
  DatasetStats stats = dataset_stats(dir / "manifest.json");
  CHECK(stats.mean_words_per_query == doctest::Approx(6.0));
  CHECK(stats.mean_moments_per_video == doctest::Approx(1.0));
  CHECK(stats.mean_moment_duration_s == doctest::Approx(6.0));
  fs::remove_all(dir);
}

TEST_CASE("splits are 50/25/25 by video") {
  SyntheticConfig cfg = base_config();
  cfg.n_videos = 12;
  auto dir = fresh_dir("lgn_synth_split");
  generate(cfg, dir);
  auto train = load_dataset(dir / "manifest.json", Split::Train);
  auto val = load_dataset(dir / "manifest.json", Split::Val);
  auto test = load_dataset(dir / "manifest.json", Split::Test);
  // easy mode: one annotation per video
  CHECK(train.size() == 6);
  CHECK(val.size() == 3);
  CHECK(test.size() == 3);
  fs::remove_all(dir);
}

TEST_CASE("the nearest-prototype oracle solves noiseless easy data") {
  SyntheticConfig cfg = base_config();
  cfg.noise_sigma = 0.0;
  cfg.n_videos = 24;
  auto dir = fresh_dir("lgn_synth_oracle");
  generate(cfg, dir);
  auto samples = load_dataset(dir / "manifest.json");
  CHECK(oracle_rank1(cfg, samples, 1.0) == doctest::Approx(100.0));
  fs::remove_all(dir);
}

TEST_CASE("compositional videos pose order-symmetric queries") {
  SyntheticConfig cfg = base_config();
  cfg.hardness = Hardness::Compositional;
  cfg.span_min = 2;
  cfg.span_max = 4;
  cfg.noise_sigma = 0.0;
  auto dir = fresh_dir("lgn_synth_comp");
  generate(cfg, dir);
  auto samples = load_dataset(dir / "manifest.json");
  // two queries per video, one per pair order
  CHECK(samples.size() == 2 * cfg.n_videos);
  DatasetStats stats = dataset_stats(dir / "manifest.json");
  CHECK(stats.mean_moments_per_video == doctest::Approx(2.0));
  for (std::size_t i = 0; i + 1 < samples.size(); i += 2) {
    REQUIRE(samples[i].annotation.video_id ==
            samples[i + 1].annotation.video_id);
    const auto& first = samples[i].annotation;
    const auto& second = samples[i + 1].annotation;
    // the two targets are disjoint spans of the same video
    CHECK(temporal_iou(first.span, second.span) == doctest::Approx(0.0));
    // queries name the same concepts in opposite orders
    REQUIRE(first.tokens.size() == 4);
    REQUIRE(second.tokens.size() == 4);
    CHECK(first.tokens[2] == "then");
    CHECK(first.tokens[1].substr(0, first.tokens[1].find('w')) ==
          second.tokens[3].substr(0, second.tokens[3].find('w')));
    CHECK(first.tokens[3].substr(0, first.tokens[3].find('w')) ==
          second.tokens[1].substr(0, second.tokens[1].find('w')));
  }
  fs::remove_all(dir);
}

TEST_SUITE_END();

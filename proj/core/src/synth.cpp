#include "lgn/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "json.hpp"
#include "lgn/rng.hpp"

namespace lgn {

namespace {

constexpr std::uint64_t kPrototypeStream = 0x9e01;
constexpr std::uint64_t kVideoStream = 0x9e02;

std::string concept_token(std::size_t concept_id, std::size_t synonym) {
  return "c" + std::to_string(concept_id) + "w" + std::to_string(synonym);
}

// Background prototype first, then one per concept; regenerated identically
// by the oracle.
std::vector<std::vector<double>> make_prototypes(const SyntheticConfig& cfg) {
  Rng rng(mix_seed(cfg.seed, kPrototypeStream));
  std::vector<std::vector<double>> protos(cfg.concepts + 1);
  for (auto& p : protos) {
    p.resize(cfg.d_v);
    for (double& v : p) v = rng.normal();
  }
  return protos;
}

struct Segment {
  std::size_t start = 0;
  std::size_t length = 0;
  std::vector<double> feature;  // d_v prototype for this segment
};

std::string video_name(std::size_t index) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "v%04zu", index);
  return buf;
}

}  // namespace

std::string hardness_name(Hardness h) {
  return h == Hardness::Easy ? "easy" : "compositional";
}

Hardness hardness_from_name(const std::string& name) {
  if (name == "easy") return Hardness::Easy;
  if (name == "compositional") return Hardness::Compositional;
  throw ConfigError("unknown hardness: " + name);
}

void SyntheticConfig::validate() const {
  if (n_videos == 0 || clips_per_video == 0 || d_v == 0) {
    throw ConfigError("synthetic config requires n_videos, clips and d_v >= 1");
  }
  if (concepts < 2) {
    throw ConfigError("synthetic config requires at least 2 concepts");
  }
  if (vocab_per_concept == 0) {
    throw ConfigError("synthetic config requires vocab_per_concept >= 1");
  }
  if (!(noise_sigma >= 0.0)) {
    throw ConfigError("synthetic config requires noise_sigma >= 0");
  }
  if (span_min < 1 || span_min > span_max || span_max > clips_per_video) {
    throw ConfigError("span length range must satisfy 1 <= min <= max <= N");
  }
  if (!(duration_s > 0.0)) {
    throw ConfigError("synthetic config requires a positive duration");
  }
  if (hardness == Hardness::Compositional) {
    const std::size_t half_max =
        std::max(std::max<std::size_t>(1, span_min / 2), span_max / 2);
    if (6 * half_max > clips_per_video) {
      throw ConfigError(
          "compositional mode places two ordered pairs plus two singles; "
          "reduce span_max or raise N");
    }
  }
}

void generate(const SyntheticConfig& cfg,
              const std::filesystem::path& out_dir) {
  cfg.validate();
  namespace fs = std::filesystem;
  fs::create_directories(out_dir / "features");

  const std::size_t N = cfg.clips_per_video;
  const auto protos = make_prototypes(cfg);
  const auto& background = protos[cfg.concepts];

  std::vector<AnnotationRecord> annotations;
  DatasetManifest manifest;
  manifest.annotations = "annotations.jsonl";

  for (std::size_t vi = 0; vi < cfg.n_videos; ++vi) {
    Rng rng(mix_seed(cfg.seed, kVideoStream, vi));
    const std::string id = video_name(vi);

    std::vector<Segment> segments;
    std::vector<AnnotationRecord> video_annotations;

    auto synonym = [&](std::size_t concept_id) {
      return concept_token(concept_id, rng.below(cfg.vocab_per_concept));
    };

    if (cfg.hardness == Hardness::Easy) {
      const std::size_t concept_id = rng.below(cfg.concepts);
      const std::size_t len = rng.between(cfg.span_min, cfg.span_max);
      const std::size_t start = rng.below(N - len + 1);
      segments.push_back(Segment{start, len, protos[concept_id]});

      AnnotationRecord rec;
      rec.video_id = id;
      rec.tokens = {"find", "the", synonym(concept_id)};
      rec.span = cell_to_span(start, start + len - 1, N, cfg.duration_s);
      video_annotations.push_back(std::move(rec));
    } else {
      // Two concepts appear in both orders: the span "a then b" answers one
      // query, "b then a" the other, and both concepts also appear alone.
      // Pooled cell features are order-invariant, so the queried order can
      // only be resolved by relating neighboring cells under the query.
      std::vector<std::size_t> picks(cfg.concepts);
      for (std::size_t i = 0; i < picks.size(); ++i) picks[i] = i;
      rng.shuffle(picks);
      const std::size_t ca = picks[0], cb = picks[1];

      const std::size_t half_min = std::max<std::size_t>(1, cfg.span_min / 2);
      const std::size_t half_max = std::max(half_min, cfg.span_max / 2);
      auto draw_half = [&]() { return rng.between(half_min, half_max); };

      // segment roles: 0 = a-then-b, 1 = b-then-a, 2 = a alone, 3 = b alone
      struct Piece {
        std::size_t length;
        const std::vector<double>* first;
        const std::vector<double>* second;  // null for singles
        std::size_t first_length;
      };
      std::vector<Piece> pieces(4);
      {
        std::size_t ha = draw_half(), hb = draw_half();
        pieces[0] = Piece{ha + hb, &protos[ca], &protos[cb], ha};
      }
      {
        std::size_t hb = draw_half(), ha = draw_half();
        pieces[1] = Piece{hb + ha, &protos[cb], &protos[ca], hb};
      }
      pieces[2] = Piece{draw_half(), &protos[ca], nullptr, 0};
      pieces[3] = Piece{draw_half(), &protos[cb], nullptr, 0};

      std::vector<std::size_t> order = {0, 1, 2, 3};
      rng.shuffle(order);
      std::size_t total = 0;
      for (const Piece& piece : pieces) total += piece.length;
      std::size_t free = N - total;
      std::size_t cursor = 0;
      std::vector<std::size_t> starts(4);
      for (std::size_t i = 0; i < 4; ++i) {
        const std::size_t gap = rng.below(free + 1);
        free -= gap;
        cursor += gap;
        starts[order[i]] = cursor;
        cursor += pieces[order[i]].length;
      }
      for (std::size_t r = 0; r < 4; ++r) {
        const Piece& piece = pieces[r];
        if (piece.second == nullptr) {
          segments.push_back(Segment{starts[r], piece.length, *piece.first});
        } else {
          segments.push_back(
              Segment{starts[r], piece.first_length, *piece.first});
          segments.push_back(Segment{starts[r] + piece.first_length,
                                     piece.length - piece.first_length,
                                     *piece.second});
        }
      }

      auto annotate = [&](std::size_t role, std::size_t x, std::size_t y) {
        AnnotationRecord rec;
        rec.video_id = id;
        rec.tokens = {"find", synonym(x), "then", synonym(y)};
        rec.span = cell_to_span(starts[role],
                                starts[role] + pieces[role].length - 1, N,
                                cfg.duration_s);
        video_annotations.push_back(std::move(rec));
      };
      annotate(0, ca, cb);
      annotate(1, cb, ca);
    }

    std::vector<double> clips(N * cfg.d_v);
    for (std::size_t t = 0; t < N; ++t) {
      const std::vector<double>* source = &background;
      for (const Segment& seg : segments) {
        if (t >= seg.start && t < seg.start + seg.length) {
          source = &seg.feature;
          break;
        }
      }
      for (std::size_t c = 0; c < cfg.d_v; ++c) {
        clips[t * cfg.d_v + c] =
            (*source)[c] + cfg.noise_sigma * rng.normal();
      }
    }

    ClipFeatureSequence seq;
    seq.video_id = id;
    seq.duration_s = cfg.duration_s;
    seq.features = Tensor({N, cfg.d_v}, std::move(clips));
    const std::string feature_file = "features/" + id + ".lgnf";
    write_feature_file(out_dir / feature_file, seq);

    // 50/25/25 by video index
    Split split = Split::Test;
    if (vi * 2 < cfg.n_videos) {
      split = Split::Train;
    } else if (vi * 4 < 3 * cfg.n_videos) {
      split = Split::Val;
    }
    manifest.videos.push_back(ManifestVideo{id, feature_file, split});
    for (AnnotationRecord& rec : video_annotations)
      annotations.push_back(std::move(rec));
  }

  write_annotations(out_dir / "annotations.jsonl", annotations);
  manifest.write(out_dir / "manifest.json");

  nlohmann::json synth_json{
      {"n_videos", cfg.n_videos},
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
  std::ofstream synth_out(out_dir / "synth.json");
  synth_out << synth_json.dump(2) << '\n';
}

double oracle_rank1(const SyntheticConfig& cfg,
                    const std::vector<Sample>& samples,
                    double iou_threshold) {
  cfg.validate();
  if (samples.empty()) {
    throw ValidationError("oracle_rank1 requires a non-empty sample set");
  }
  const auto protos = make_prototypes(cfg);
  const std::size_t N = cfg.clips_per_video;

  auto parse_concept = [&](const std::vector<std::string>& tokens)
      -> std::size_t {
    for (const std::string& t : tokens) {
      if (t.size() >= 3 && t[0] == 'c') {
        auto w = t.find('w');
        if (w != std::string::npos && w > 1) {
          return static_cast<std::size_t>(std::stoul(t.substr(1, w - 1)));
        }
      }
    }
    throw ValidationError("oracle: query names no concept token");
  };

  std::size_t hits = 0;
  for (const Sample& sample : samples) {
    const std::size_t target = parse_concept(sample.annotation.tokens);
    auto feats = sample.video->features.values();
    const std::size_t d = sample.video->feature_width();

    // nearest prototype per clip (background included)
    std::vector<std::size_t> labels(N);
    for (std::size_t t = 0; t < N; ++t) {
      double best = 0.0;
      std::size_t best_label = 0;
      for (std::size_t p = 0; p < protos.size(); ++p) {
        double dist = 0.0;
        for (std::size_t c = 0; c < d; ++c) {
          const double diff = feats[t * d + c] - protos[p][c];
          dist += diff * diff;
        }
        if (p == 0 || dist < best) {
          best = dist;
          best_label = p;
        }
      }
      labels[t] = best_label;
    }

    // longest run of the target concept, earliest on ties
    std::size_t run_start = 0, run_len = 0, best_start = 0, best_len = 0;
    for (std::size_t t = 0; t <= N; ++t) {
      if (t < N && labels[t] == target) {
        if (run_len == 0) run_start = t;
        ++run_len;
      } else {
        if (run_len > best_len) {
          best_len = run_len;
          best_start = run_start;
        }
        run_len = 0;
      }
    }
    if (best_len == 0) continue;
    MomentSpan predicted = cell_to_span(best_start, best_start + best_len - 1,
                                        N, sample.video->duration_s);
    if (temporal_iou(predicted, sample.annotation.span) >= iou_threshold) {
      ++hits;
    }
  }
  return 100.0 * static_cast<double>(hits) /
         static_cast<double>(samples.size());
}

}  // namespace lgn

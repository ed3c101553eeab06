#include "lgn/dataset.hpp"

#include <fstream>
#include <unordered_map>

#include "json.hpp"
#include "wire.hpp"

namespace lgn {

std::string split_name(Split split) {
  switch (split) {
    case Split::Train: return "train";
    case Split::Val: return "val";
    case Split::Test: return "test";
  }
  return "train";
}

Split split_from_name(const std::string& name) {
  if (name == "train") return Split::Train;
  if (name == "val") return Split::Val;
  if (name == "test") return Split::Test;
  throw ValidationError("unknown split: " + name);
}

void write_feature_file(const std::filesystem::path& path,
                        const ClipFeatureSequence& seq) {
  seq.validate();
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw FormatError("cannot open feature file for writing: " +
                      path.string());
  }
  out.write("LGNF", 4);
  wire::write_u32(out, 1);
  wire::write_u32(out, static_cast<std::uint32_t>(seq.clip_count()));
  wire::write_u32(out, static_cast<std::uint32_t>(seq.feature_width()));
  wire::write_u32(out,
                  static_cast<std::uint32_t>(seq.duration_s * 1000.0 + 0.5));
  for (double v : seq.features.values())
    wire::write_f32(out, static_cast<float>(v));
  if (!out) {
    throw FormatError("failed writing feature file: " + path.string());
  }
}

ClipFeatureSequence read_feature_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw FormatError("cannot open feature file: " + path.string());
  }
  char magic[4];
  if (!in.read(magic, 4) || std::string(magic, 4) != "LGNF") {
    throw FormatError("bad magic in feature file: " + path.string());
  }
  std::uint32_t version = 0, t = 0, d_v = 0, duration_ms = 0;
  if (!wire::read_u32(in, version) || !wire::read_u32(in, t) ||
      !wire::read_u32(in, d_v) || !wire::read_u32(in, duration_ms)) {
    throw FormatError("truncated header in feature file: " + path.string());
  }
  if (version != 1) {
    throw FormatError("unsupported feature file version " +
                      std::to_string(version) + ": " + path.string());
  }
  if (t == 0 || d_v == 0) {
    throw FormatError("feature file declares empty dimensions: " +
                      path.string());
  }
  std::vector<double> values(static_cast<std::size_t>(t) * d_v);
  for (double& v : values) {
    float f;
    if (!wire::read_f32(in, f)) {
      throw FormatError("feature payload shorter than declared T*d_v in: " +
                        path.string());
    }
    v = static_cast<double>(f);
  }
  char extra;
  if (in.read(&extra, 1)) {
    throw FormatError("feature payload longer than declared T*d_v in: " +
                      path.string());
  }
  ClipFeatureSequence seq;
  seq.video_id = path.stem().string();
  seq.duration_s = static_cast<double>(duration_ms) / 1000.0;
  seq.features = Tensor({t, d_v}, std::move(values));
  seq.validate();
  return seq;
}

void write_annotations(const std::filesystem::path& path,
                       const std::vector<AnnotationRecord>& annotations) {
  std::ofstream out(path);
  if (!out) {
    throw FormatError("cannot open annotation file for writing: " +
                      path.string());
  }
  for (const AnnotationRecord& a : annotations) {
    nlohmann::json j{{"video_id", a.video_id},
                     {"tokens", a.tokens},
                     {"start_s", a.span.start_s},
                     {"end_s", a.span.end_s}};
    out << j.dump() << '\n';
  }
}

std::vector<AnnotationRecord> read_annotations(
    const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw FormatError("cannot open annotation file: " + path.string());
  }
  std::vector<AnnotationRecord> records;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw FormatError("annotation file " + path.string() + " line " +
                        std::to_string(line_no) + ": " + e.what());
    }
    AnnotationRecord rec;
    try {
      rec.video_id = j.at("video_id").get<std::string>();
      rec.tokens = j.at("tokens").get<std::vector<std::string>>();
      double start = j.at("start_s").get<double>();
      double end = j.at("end_s").get<double>();
      rec.span = MomentSpan(start, end);
    } catch (const nlohmann::json::exception& e) {
      throw FormatError("annotation file " + path.string() + " line " +
                        std::to_string(line_no) + ": " + e.what());
    } catch (const InvalidSpanError& e) {
      throw ValidationError("annotation file " + path.string() + " line " +
                            std::to_string(line_no) + ": " + e.what());
    }
    records.push_back(std::move(rec));
  }
  return records;
}

DatasetManifest DatasetManifest::read(
    const std::filesystem::path& manifest_path) {
  std::ifstream in(manifest_path);
  if (!in) {
    throw FormatError("cannot open manifest: " + manifest_path.string());
  }
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("manifest is not valid JSON (" + std::string(e.what()) +
                      "): " + manifest_path.string());
  }
  DatasetManifest manifest;
  manifest.root = manifest_path.parent_path();
  manifest.annotations = j.at("annotations").get<std::string>();
  for (const auto& v : j.at("videos")) {
    ManifestVideo mv;
    mv.id = v.at("id").get<std::string>();
    mv.features = v.at("features").get<std::string>();
    mv.split = split_from_name(v.at("split").get<std::string>());
    manifest.videos.push_back(std::move(mv));
  }
  return manifest;
}

void DatasetManifest::write(const std::filesystem::path& manifest_path) const {
  nlohmann::json videos_json = nlohmann::json::array();
  for (const ManifestVideo& v : videos) {
    videos_json.push_back(nlohmann::json{{"id", v.id},
                                         {"features", v.features},
                                         {"split", split_name(v.split)}});
  }
  nlohmann::json j{{"annotations", annotations}, {"videos", videos_json}};
  std::ofstream out(manifest_path);
  if (!out) {
    throw FormatError("cannot open manifest for writing: " +
                      manifest_path.string());
  }
  out << j.dump(2) << '\n';
}

std::vector<Sample> load_dataset(const std::filesystem::path& manifest_path,
                                 std::optional<Split> split) {
  DatasetManifest manifest = DatasetManifest::read(manifest_path);

  std::unordered_map<std::string, std::shared_ptr<const ClipFeatureSequence>>
      videos;
  std::unordered_map<std::string, Split> splits;
  for (const ManifestVideo& mv : manifest.videos) {
    ClipFeatureSequence seq = read_feature_file(manifest.root / mv.features);
    seq.video_id = mv.id;
    videos.emplace(mv.id,
                   std::make_shared<const ClipFeatureSequence>(std::move(seq)));
    splits.emplace(mv.id, mv.split);
  }

  std::vector<AnnotationRecord> annotations =
      read_annotations(manifest.root / manifest.annotations);

  std::vector<Sample> samples;
  samples.reserve(annotations.size());
  for (AnnotationRecord& rec : annotations) {
    auto it = videos.find(rec.video_id);
    if (it == videos.end()) {
      throw ResolutionError("annotation references unknown video id '" +
                            rec.video_id + "'");
    }
    const auto& video = it->second;
    if (rec.span.end_s > video->duration_s + 1e-9) {
      throw ValidationError("annotation span [" +
                            std::to_string(rec.span.start_s) + ", " +
                            std::to_string(rec.span.end_s) +
                            ") exceeds duration " +
                            std::to_string(video->duration_s) +
                            " of video '" + rec.video_id + "'");
    }
    if (split.has_value() && splits.at(rec.video_id) != *split) continue;
    samples.push_back(Sample{video, std::move(rec)});
  }
  return samples;
}

DatasetStats dataset_stats(const std::filesystem::path& manifest_path) {
  std::vector<Sample> samples = load_dataset(manifest_path);
  if (samples.empty()) {
    throw ValidationError("dataset has no annotations: " +
                          manifest_path.string());
  }
  DatasetStats stats;
  stats.annotation_count = samples.size();
  std::unordered_map<std::string, std::size_t> moments_per_video;
  double words = 0.0, duration = 0.0;
  for (const Sample& s : samples) {
    words += static_cast<double>(s.annotation.tokens.size());
    duration += s.annotation.span.length();
    moments_per_video[s.annotation.video_id] += 1;
  }
  stats.video_count = moments_per_video.size();
  const double q = static_cast<double>(samples.size());
  stats.mean_words_per_query = words / q;
  stats.mean_moment_duration_s = duration / q;
  stats.mean_moments_per_video = q / static_cast<double>(stats.video_count);
  return stats;
}

Vocabulary vocabulary_from_samples(const std::vector<Sample>& samples) {
  Vocabulary vocab;
  for (const Sample& s : samples)
    for (const std::string& token : s.annotation.tokens) vocab.add(token);
  return vocab;
}

}  // namespace lgn

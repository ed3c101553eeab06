#pragma once

#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "lgn/moment_map.hpp"
#include "lgn/text_encoder.hpp"

namespace lgn {

enum class Split { Train, Val, Test };

std::string split_name(Split split);
Split split_from_name(const std::string& name);

// One query against one video. Videos are shared between samples.
struct Sample {
  std::shared_ptr<const ClipFeatureSequence> video;
  AnnotationRecord annotation;
};

struct DatasetStats {
  std::size_t video_count = 0;
  std::size_t annotation_count = 0;
  double mean_words_per_query = 0.0;
  double mean_moments_per_video = 0.0;
  double mean_moment_duration_s = 0.0;
};

// Clip-feature container file. Layout: magic "LGNF", u32 version (= 1),
// u32 T, u32 d_v, u32 duration in milliseconds, then T*d_v little-endian
// 32-bit floats row-major.
void write_feature_file(const std::filesystem::path& path,
                        const ClipFeatureSequence& seq);
ClipFeatureSequence read_feature_file(const std::filesystem::path& path);

// Annotation file: one JSON object per line with video_id, tokens,
// start_s, end_s.
void write_annotations(const std::filesystem::path& path,
                       const std::vector<AnnotationRecord>& annotations);
std::vector<AnnotationRecord> read_annotations(
    const std::filesystem::path& path);

// Manifest entry binding a video id to its feature file and split.
struct ManifestVideo {
  std::string id;
  std::string features;  // path relative to the manifest directory
  Split split = Split::Train;
};

struct DatasetManifest {
  std::filesystem::path root;  // directory holding the manifest
  std::vector<ManifestVideo> videos;
  std::string annotations;  // relative path

  static DatasetManifest read(const std::filesystem::path& manifest_path);
  void write(const std::filesystem::path& manifest_path) const;
};

// Streams validated (video, annotation) pairs. Every annotation must
// resolve to a manifest video and lie inside its duration. An empty split
// filter loads everything.
std::vector<Sample> load_dataset(const std::filesystem::path& manifest_path,
                                 std::optional<Split> split = std::nullopt);

DatasetStats dataset_stats(const std::filesystem::path& manifest_path);

// Vocabulary over every token seen in the samples, in encounter order, so
// ids are deterministic for a fixed dataset.
Vocabulary vocabulary_from_samples(const std::vector<Sample>& samples);

}  // namespace lgn

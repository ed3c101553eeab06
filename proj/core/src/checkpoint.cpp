#include "lgn/checkpoint.hpp"

#include <fstream>

#include "lgn/config_io.hpp"
#include "wire.hpp"

namespace lgn {

void save_checkpoint(const std::filesystem::path& path,
                     const LgnModel& model) {
  nlohmann::json manifest = nlohmann::json::array();
  for (const Parameter& p : model.params().items()) {
    manifest.push_back(nlohmann::json{{"name", p.name},
                                      {"shape", p.tensor.shape()},
                                      {"trainable", p.trainable}});
  }
  nlohmann::json header{{"format", "lgn-checkpoint"},
                        {"version", 1},
                        {"config", model.config()},
                        {"vocab", model.vocab().tokens()},
                        {"manifest", manifest}};

  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw FormatError("cannot open checkpoint for writing: " + path.string());
  }
  out << header.dump() << '\n';
  for (const Parameter& p : model.params().items()) {
    for (double v : p.tensor.values()) wire::write_f64(out, v);
  }
  if (!out) {
    throw FormatError("failed writing checkpoint: " + path.string());
  }
}

LgnModel load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw FormatError("cannot open checkpoint: " + path.string());
  }
  std::string header_line;
  if (!std::getline(in, header_line)) {
    throw FormatError("checkpoint missing header: " + path.string());
  }
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(header_line);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("checkpoint header is not valid JSON (" +
                      std::string(e.what()) + "): " + path.string());
  }
  if (header.value("format", "") != "lgn-checkpoint") {
    throw FormatError("not an lgn checkpoint: " + path.string());
  }

  ModelConfig cfg = header.at("config").get<ModelConfig>();
  Vocabulary vocab;
  {
    auto tokens = header.at("vocab").get<std::vector<std::string>>();
    for (std::size_t i = 2; i < tokens.size(); ++i) vocab.add(tokens[i]);
  }
  Rng rng(cfg.seed);
  LgnModel model(cfg, std::move(vocab), rng);

  const auto& manifest = header.at("manifest");
  const auto& items = model.params().items();
  if (manifest.size() != items.size()) {
    throw FormatError("checkpoint manifest lists " +
                      std::to_string(manifest.size()) + " parameters, model " +
                      "defines " + std::to_string(items.size()));
  }
  for (std::size_t i = 0; i < items.size(); ++i) {
    const auto& entry = manifest[i];
    std::string name = entry.at("name").get<std::string>();
    Shape shape = entry.at("shape").get<Shape>();
    if (name != items[i].name) {
      throw FormatError("checkpoint parameter '" + name +
                        "' does not match expected '" + items[i].name + "'");
    }
    if (shape != items[i].tensor.shape()) {
      throw FormatError("checkpoint parameter '" + name + "' has shape " +
                        shape_str(shape) + " but the configuration implies " +
                        shape_str(items[i].tensor.shape()));
    }
  }
  for (Parameter& p : model.params().items()) {
    auto vals = p.tensor.values_mut();
    for (double& v : vals) {
      if (!wire::read_f64(in, v)) {
        throw FormatError("checkpoint payload truncated at parameter '" +
                          p.name + "': " + path.string());
      }
    }
  }
  for (std::size_t i = 0; i < items.size(); ++i) {
    model.params().items()[i].trainable =
        manifest[i].value("trainable", true);
  }
  return model;
}

}  // namespace lgn

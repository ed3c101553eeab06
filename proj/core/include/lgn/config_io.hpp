#pragma once

#include "json.hpp"
#include "lgn/model.hpp"
#include "lgn/synth.hpp"
#include "lgn/training.hpp"

namespace lgn {

// JSON mirrors the config field names one to one. from_json applies only
// the keys that are present, so partial configs override defaults. A
// "preset" key ("paper-dims") on the model config selects a base before
// overrides.

void to_json(nlohmann::json& j, const ModelConfig& cfg);
void from_json(const nlohmann::json& j, ModelConfig& cfg);

void to_json(nlohmann::json& j, const TrainConfig& cfg);
void from_json(const nlohmann::json& j, TrainConfig& cfg);

void to_json(nlohmann::json& j, const SyntheticConfig& cfg);
void from_json(const nlohmann::json& j, SyntheticConfig& cfg);

std::string pooling_name(PoolingMode mode);
PoolingMode pooling_from_name(const std::string& name);

}  // namespace lgn

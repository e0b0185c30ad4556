#pragma once

// Training configuration as JSON: full echo of defaults, dotted-path
// overrides, named presets and ablations, and a stable content hash.

#include "infoprio/agent.hpp"

#include <nlohmann/json.hpp>

#include <string>

namespace infoprio::config {

nlohmann::json to_json(const agent::TrainConfig& cfg);
/// Missing fields keep their defaults; unknown fields throw ConfigError.
agent::TrainConfig train_config_from_json(const nlohmann::json& doc);

/// "desk" (defaults) or "paper" (published widths, rates and ratios).
nlohmann::json preset(const std::string& name);

/// "key.sub=value" applied to a JSON document. The value is parsed as JSON
/// when possible and taken as a string otherwise.
void apply_override(nlohmann::json& doc, const std::string& assignment);

/// full | no-emp-policy | no-emp-repr | contrastive-only | recon.
void apply_ablation(nlohmann::json& doc, const std::string& name);

/// 16 hex digits of FNV-1a over the compact dump.
std::string config_hash(const nlohmann::json& doc);

}  // namespace infoprio::config

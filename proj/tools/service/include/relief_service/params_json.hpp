#pragma once

#include <nlohmann/json.hpp>

#include "relief/compression.hpp"
#include "relief/session.hpp"

namespace relief::service {

nlohmann::json params_to_json(const ReliefParams& p);

/// Overwrites the knobs present in `j` (alpha, beta, gamma, base). A base
/// is either a spec string such as "wave:0.05,3,x" or an object
/// {"kind": "plane"|"fold"|"wave", ...}. Throws InvalidArgument on
/// wrong types or unknown keys.
void apply_params_json(const nlohmann::json& j, ReliefParams& p);
BaseSurface base_from_json(const nlohmann::json& j);

/// Session settings from an upload's config JSON: the knobs above plus
/// controls, levels and reference_mode.
SessionConfig session_config_from_json(const nlohmann::json& j);

nlohmann::json timings_to_json(const PrepareTimings& t);

}  // namespace relief::service

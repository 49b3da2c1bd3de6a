#include "relief_service/params_json.hpp"

#include <chrono>

#include "relief/error.hpp"

namespace relief::service {
namespace {

double number(const nlohmann::json& j, const char* key) {
  if (!j.is_number()) throw Error(ErrorCode::InvalidArgument, std::string(key) + " must be a number");
  return j.get<double>();
}

}  // namespace

nlohmann::json params_to_json(const ReliefParams& p) {
  nlohmann::json j = {{"alpha", p.alpha}, {"beta", p.beta}, {"gamma", p.gamma}};
  j["base"] = p.base.kind() == BaseSurface::Kind::Heightfield ? "heightfield" : p.base.to_string();
  return j;
}

BaseSurface base_from_json(const nlohmann::json& j) {
  if (j.is_string()) return BaseSurface::parse(j.get<std::string>());
  if (!j.is_object() || !j.contains("kind") || !j["kind"].is_string()) {
    throw Error(ErrorCode::InvalidArgument, "base must be a string or an object with a kind");
  }
  const std::string kind = j["kind"];
  auto get = [&](const char* key, double fallback) { return j.contains(key) ? number(j[key], key) : fallback; };
  if (kind == "plane") return BaseSurface::plane(get("z0", 0.0));
  if (kind == "fold") return BaseSurface::folded(get("x0", 0.0), get("s1", 0.0), get("s2", 0.0));
  if (kind == "wave") {
    const std::string axis = j.value("axis", std::string("x"));
    if (axis.size() != 1) throw Error(ErrorCode::InvalidArgument, "wave axis must be x or y");
    return BaseSurface::wave(get("amp", 0.0), get("freq", 1.0), axis[0]);
  }
  throw Error(ErrorCode::InvalidArgument, "unknown base kind '" + kind + "'");
}

void apply_params_json(const nlohmann::json& j, ReliefParams& p) {
  if (!j.is_object()) throw Error(ErrorCode::InvalidArgument, "parameters must be a JSON object");
  ReliefParams out = p;
  for (const auto& [key, value] : j.items()) {
    if (key == "alpha") out.alpha = number(value, "alpha");
    else if (key == "beta") out.beta = number(value, "beta");
    else if (key == "gamma") out.gamma = number(value, "gamma");
    else if (key == "base") out.base = base_from_json(value);
    else throw Error(ErrorCode::InvalidArgument, "unknown parameter '" + key + "'");
  }
  out.validate();
  p = out;
}

SessionConfig session_config_from_json(const nlohmann::json& j) {
  SessionConfig cfg;
  if (j.is_null()) return cfg;
  if (!j.is_object()) throw Error(ErrorCode::InvalidArgument, "config must be a JSON object");
  nlohmann::json knobs = nlohmann::json::object();
  for (const auto& [key, value] : j.items()) {
    if (key == "controls") {
      if (!value.is_number_unsigned() || value.get<std::size_t>() == 0) {
        throw Error(ErrorCode::InvalidArgument, "controls must be a positive integer");
      }
      cfg.control_target = value.get<std::size_t>();
    } else if (key == "levels") {
      if (!value.is_number_integer()) throw Error(ErrorCode::InvalidArgument, "levels must be an integer");
      cfg.mbs_levels = value.get<int>();
    } else if (key == "prepare_timeout_ms") {
      if (!value.is_number_unsigned()) throw Error(ErrorCode::InvalidArgument, "prepare_timeout_ms must be a non-negative integer");
      cfg.prepare_timeout = std::chrono::milliseconds(value.get<std::int64_t>());
    } else if (key == "reference_mode") {
      if (!value.is_boolean()) throw Error(ErrorCode::InvalidArgument, "reference_mode must be a boolean");
      cfg.reference_mode = value.get<bool>();
    } else {
      knobs[key] = value;
    }
  }
  apply_params_json(knobs, cfg.params);
  return cfg;
}

nlohmann::json timings_to_json(const PrepareTimings& t) {
  return {{"align_ms", t.align_ms},         {"visible_ms", t.visible_ms},     {"boundary_ms", t.boundary_ms},
          {"curvature_ms", t.curvature_ms}, {"sampling_ms", t.sampling_ms},   {"assemble_ms", t.assemble_ms},
          {"reference_ms", t.reference_ms}, {"triangulate_ms", t.triangulate_ms}, {"total_ms", t.total_ms}};
}

}  // namespace relief::service

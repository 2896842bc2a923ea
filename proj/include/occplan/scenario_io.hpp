#pragma once

#include "occplan/types.hpp"

#include <json.hpp>

#include <string>
#include <vector>

namespace occplan {

/// Scenario files are JSON documents. Only `noise` and `timing.t_p` may be
/// omitted among the top-level entries; tuning sections fall back to defaults.
WorldState parse_scenario(const nlohmann::json& doc);
nlohmann::json scenario_to_json(const WorldState& world);

/// Canonical text form: save -> load -> save is byte-identical.
std::string serialize_scenario(const WorldState& world);

WorldState load_scenario(const std::string& path);
void save_scenario(const WorldState& world, const std::string& path);

/// Applies `dotted.key=value` overrides to a canonical scenario document.
/// Keys must already exist in the document; array elements use numeric path
/// components (`others.0.speed`). Values parse as JSON, else as strings.
void apply_overrides(nlohmann::json& doc, const std::vector<std::string>& overrides);

/// Loads a scenario file and applies overrides to its canonical form.
WorldState load_scenario(const std::string& path, const std::vector<std::string>& overrides);

}  // namespace occplan

#pragma once

#include <string>

#include "json.hpp"
#include "sim.hpp"

namespace bfln::config {

using Json = nlohmann::ordered_json;

// Strict: unknown keys and wrong types raise configuration errors naming the
// offending field. Missing keys keep their defaults.
sim::SimConfig sim_from_json(const Json& j);
// Every field, defaults included.
Json sim_to_json(const sim::SimConfig& cfg);

Json read_json_file(const std::string& path);

bool non_negative_integer(const Json& v);

}  // namespace bfln::config

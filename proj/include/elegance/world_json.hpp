#pragma once

#include <json.hpp>

#include "elegance/world.hpp"

// JSON forms for trajectory logs. Doubles round-trip exactly through
// nlohmann's shortest-representation output, which the replay verifier
// relies on.
namespace elegance::world {

void to_json(nlohmann::json& j, const Region& r);
void from_json(const nlohmann::json& j, Region& r);

void to_json(nlohmann::json& j, const ObjectState& o);
void from_json(const nlohmann::json& j, ObjectState& o);

void to_json(nlohmann::json& j, const GripperState& g);
void from_json(const nlohmann::json& j, GripperState& g);

void to_json(nlohmann::json& j, const WorldState& s);
void from_json(const nlohmann::json& j, WorldState& s);

void to_json(nlohmann::json& j, const Action& a);
void from_json(const nlohmann::json& j, Action& a);

void to_json(nlohmann::json& j, const StepEvents& e);
void from_json(const nlohmann::json& j, StepEvents& e);

void to_json(nlohmann::json& j, const WorldConstants& c);
void from_json(const nlohmann::json& j, WorldConstants& c);

}  // namespace elegance::world

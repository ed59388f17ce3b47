#pragma once

// Shared test fixtures: a 5-type toy ontology, the shipped data files, and a
// programmatic single-room scene builder.

#include <string>

#include <json.hpp>

#include "tidysim/ontology.hpp"
#include "tidysim/scene.hpp"

namespace fx {

inline std::string data_dir() { return TIDYSIM_DATA_DIR; }

inline nlohmann::json toy_ontology_json() {
  return nlohmann::json{
      {"schema_version", 1},
      {"object_types",
       nlohmann::json::array(
           {{{"name", "Ball"}, {"pickupable", true}, {"receptacle", false}, {"height_class", "low-surface"}},
            {{"name", "Cup"}, {"pickupable", true}, {"receptacle", false}, {"height_class", "low-surface"}},
            {{"name", "Table"}, {"pickupable", false}, {"receptacle", true}, {"height_class", "high-surface"}},
            {{"name", "Box"}, {"pickupable", false}, {"receptacle", true}, {"height_class", "low-surface"}},
            {{"name", "Rack"}, {"pickupable", false}, {"receptacle", true}, {"height_class", "high-surface"}}})},
      {"room_types", nlohmann::json::array({"Kitchen", "LivingRoom", "Bedroom", "Bathroom"})},
      {"triples", nlohmann::json::array({nlohmann::json::array({"Ball", "Box", "LivingRoom"}),
                                         nlohmann::json::array({"Cup", "Table", "Kitchen"}),
                                         nlohmann::json::array({"Cup", "Box", "Kitchen"}),
                                         nlohmann::json::array({"Cup", "Rack", "Bathroom"})})}};
}

inline tidysim::Ontology toy_ontology() { return tidysim::Ontology::from_json(toy_ontology_json()); }

inline const tidysim::Ontology& default_ontology() {
  static tidysim::Ontology kb = tidysim::Ontology::load(data_dir() + "/ontology.json");
  return kb;
}

inline tidysim::Scene demo_scene() {
  return tidysim::Scene::load(data_dir() + "/scenes/two_room.json", default_ontology());
}

// One rectangular room filling the grid (1-cell wall border), given type.
inline nlohmann::json room_scene_json(int width, int height, const std::string& room_type) {
  nlohmann::json j;
  j["schema_version"] = 1;
  j["name"] = "fixture";
  j["width"] = width;
  j["height"] = height;
  j["rooms"] = nlohmann::json::array(
      {{{"id", "r0"}, {"type", room_type}, {"rects", nlohmann::json::array({nlohmann::json::array(
                                               {1, 1, width - 2, height - 2})})}}});
  j["receptacles"] = nlohmann::json::array();
  j["objects"] = nlohmann::json::array();
  j["agents"] = nlohmann::json::array();
  return j;
}

inline nlohmann::json agent_json(int x, int y, int rot, int mani, int hei) {
  return nlohmann::json{{"nav", 1},   {"mani", mani}, {"hei", hei},       {"x", x},
                        {"y", y},     {"rot", rot},   {"pitch", 0},       {"held", ""},
                        {"stopped", false}};
}

}  // namespace fx

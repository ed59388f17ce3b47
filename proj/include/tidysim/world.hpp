#pragma once

// Action semantics (navigation + manipulation), height-aware visibility, and
// the ground-truth discriminator application over a Scene.

#include <string>
#include <vector>

#include "tidysim/ontology.hpp"
#include "tidysim/scene.hpp"

namespace tidysim {

enum class ActionType {
  MoveAhead,
  MoveRight,
  MoveLeft,
  RotateRight,
  RotateLeft,
  LookUp,
  LookDown,
  Stop,
  PickUp,
  PutDown,
  Drop
};

inline bool is_mani_action(ActionType t) {
  return t == ActionType::PickUp || t == ActionType::PutDown || t == ActionType::Drop;
}

inline std::string to_string(ActionType t) {
  switch (t) {
    case ActionType::MoveAhead: return "MoveAhead";
    case ActionType::MoveRight: return "MoveRight";
    case ActionType::MoveLeft: return "MoveLeft";
    case ActionType::RotateRight: return "RotateRight";
    case ActionType::RotateLeft: return "RotateLeft";
    case ActionType::LookUp: return "LookUp";
    case ActionType::LookDown: return "LookDown";
    case ActionType::Stop: return "Stop";
    case ActionType::PickUp: return "PickUp";
    case ActionType::PutDown: return "PutDown";
    case ActionType::Drop: return "Drop";
  }
  return "?";
}

inline ActionType action_type_from_string(const std::string& s) {
  for (ActionType t : {ActionType::MoveAhead, ActionType::MoveRight, ActionType::MoveLeft,
                       ActionType::RotateRight, ActionType::RotateLeft, ActionType::LookUp,
                       ActionType::LookDown, ActionType::Stop, ActionType::PickUp,
                       ActionType::PutDown, ActionType::Drop})
    if (to_string(t) == s) return t;
  throw LookupError("unknown action '" + s + "'");
}

struct Action {
  ActionType type = ActionType::Stop;
  std::string target;  // object id for PickUp, receptacle id for PutDown

  static Action simple(ActionType t) { return Action{t, ""}; }
  static Action pick(const std::string& object_id) { return Action{ActionType::PickUp, object_id}; }
  static Action put(const std::string& receptacle_id) {
    return Action{ActionType::PutDown, receptacle_id};
  }
  friend bool operator==(const Action& a, const Action& b) {
    return a.type == b.type && a.target == b.target;
  }
};

enum class StepStatus { Success, Blocked, Invalid };

inline std::string to_string(StepStatus s) {
  switch (s) {
    case StepStatus::Success: return "success";
    case StepStatus::Blocked: return "blocked";
    case StepStatus::Invalid: return "invalid";
  }
  return "?";
}

inline StepStatus step_status_from_string(const std::string& s) {
  if (s == "success") return StepStatus::Success;
  if (s == "blocked") return StepStatus::Blocked;
  if (s == "invalid") return StepStatus::Invalid;
  throw LookupError("unknown step status '" + s + "'");
}

struct StepResult {
  StepStatus status = StepStatus::Success;
  std::string note;  // post-action scene delta or failure reason
  bool ok() const { return status == StepStatus::Success; }
};

struct WorldConfig {
  int r_vis = 20;             // visibility range, cells (5 m)
  int interaction_range = 6;  // PickUp/PutDown reach, cells (1.5 m)
};

// ---------------------------------------------------------------------------
// Visibility
// ---------------------------------------------------------------------------

// Range limit for an entity of height class `h` seen by an agent of height
// `hei` at camera pitch `pitch`. Low agents see floor/low surfaces at full
// range and high surfaces at half range; high agents the reverse for floor.
// Looking down extends the floor band by one cell, looking up the high band.
inline int visibility_limit(const WorldConfig& cfg, int hei, int pitch, HeightClass h) {
  const int full = cfg.r_vis;
  const int half = cfg.r_vis / 2;
  int base;
  if (hei == 0)
    base = (h == HeightClass::HighSurface) ? half : full;
  else
    base = (h == HeightClass::FloorLevel) ? half : full;
  int ring = 0;
  if (h == HeightClass::FloorLevel && pitch < 0) ring = 1;
  if (h == HeightClass::HighSurface && pitch > 0) ring = 1;
  return std::min(full, base + ring);
}

// Deterministic visibility predicate: range (height-adjusted), 90-degree
// frustum centered on the heading, and wall occlusion along the grid ray.
// Agents do not occlude; furniture does not occlude.
inline bool cell_visible(const Scene& scene, const Pose& pose, int hei, Cell target,
                         HeightClass h, const WorldConfig& cfg) {
  const int limit = visibility_limit(cfg, hei, pose.pitch, h);
  const long long d2 = dist2(pose.cell(), target);
  if (d2 > static_cast<long long>(limit) * limit) return false;
  const int dx = target.x - pose.x, dy = target.y - pose.y;
  if (dx != 0 || dy != 0) {
    const Cell hv = heading_vec(pose.rot);
    const long long dot = static_cast<long long>(hv.x) * dx + static_cast<long long>(hv.y) * dy;
    if (dot < 0) return false;
    if (2 * dot * dot < d2) return false;  // outside the 45-degree half-angle
  }
  for (const Cell& c : grid_ray(pose.cell(), target)) {
    if (c == pose.cell() || c == target) continue;
    if (scene.is_wall(c)) return false;
  }
  return true;
}

// Effective height of a placed object: the surface it rests on.
inline HeightClass effective_height(const Scene& scene, const ObjectInstance& obj,
                                    const Ontology& kb) {
  if (obj.placement.kind == PlaceKind::OnFloor) return HeightClass::FloorLevel;
  return kb.surface_height(scene.receptacle(obj.placement.receptacle_id).type);
}

struct SeenObject {
  std::string id;
  std::string type;
  std::string on_type;  // receptacle type or "Floor"
  std::string on_id;    // receptacle id, empty for floor
  std::string room_type;
  Cell cell;
};

struct SeenReceptacle {
  std::string id;
  std::string type;
  std::string room_type;
  Cell cell;
};

struct Observation {
  int agent = 0;
  Pose pose;
  std::vector<SeenObject> objects;
  std::vector<SeenReceptacle> receptacles;
  std::vector<Cell> visible_cells;  // ground cells in view (floor-level rule)
};

inline Observation observe(const Scene& scene, int agent_id, const Ontology& kb,
                           const WorldConfig& cfg = {}) {
  if (agent_id < 0 || agent_id >= static_cast<int>(scene.agents.size()))
    throw LookupError("observe: agent index out of range");
  const AgentState& agent = scene.agents[static_cast<std::size_t>(agent_id)];
  Observation obs;
  obs.agent = agent_id;
  obs.pose = agent.pose;

  for (const auto& obj : scene.objects) {
    if (obj.placement.kind == PlaceKind::Held) continue;  // held objects are nowhere
    Cell c = scene.object_cell(obj);
    if (!cell_visible(scene, agent.pose, agent.cap.hei, c, effective_height(scene, obj, kb), cfg))
      continue;
    PlacementTriple tr = scene.placement_triple(obj);
    obs.objects.push_back(SeenObject{obj.id, obj.type, tr.receptacle_type,
                                     obj.placement.kind == PlaceKind::OnReceptacle
                                         ? obj.placement.receptacle_id
                                         : std::string(),
                                     tr.room_type, c});
  }
  for (const auto& rec : scene.receptacles) {
    if (!cell_visible(scene, agent.pose, agent.cap.hei, rec.cell, kb.surface_height(rec.type), cfg))
      continue;
    obs.receptacles.push_back(SeenReceptacle{
        rec.id, rec.type, scene.rooms[static_cast<std::size_t>(rec.room)].type, rec.cell});
  }
  // Ground cells use the floor-level rule, so low agents sweep ground faster.
  const int lim = visibility_limit(cfg, agent.cap.hei, agent.pose.pitch, HeightClass::FloorLevel);
  for (int y = agent.pose.y - lim; y <= agent.pose.y + lim; ++y)
    for (int x = agent.pose.x - lim; x <= agent.pose.x + lim; ++x) {
      Cell c{x, y};
      if (!scene.in_bounds(c)) continue;
      if (cell_visible(scene, agent.pose, agent.cap.hei, c, HeightClass::FloorLevel, cfg))
        obs.visible_cells.push_back(c);
    }
  return obs;
}

// ---------------------------------------------------------------------------
// Actions
// ---------------------------------------------------------------------------

inline StepResult step(Scene& scene, int agent_id, const Action& action, const Ontology& kb,
                       const WorldConfig& cfg = {}) {
  if (agent_id < 0 || agent_id >= static_cast<int>(scene.agents.size()))
    throw LookupError("step: agent index out of range");
  AgentState& agent = scene.agents[static_cast<std::size_t>(agent_id)];

  // Action-space membership is an error, not a failed action.
  if (is_mani_action(action.type) && agent.cap.mani != 1)
    throw CapabilityError("agent " + std::to_string(agent_id) + " has mani=0 and cannot " +
                          to_string(action.type));

  if (agent.stopped) return {StepStatus::Invalid, "agent is stopped"};

  switch (action.type) {
    case ActionType::MoveAhead:
    case ActionType::MoveRight:
    case ActionType::MoveLeft: {
      int rot = agent.pose.rot;
      if (action.type == ActionType::MoveRight) rot = norm_rot(rot + 90);
      if (action.type == ActionType::MoveLeft) rot = norm_rot(rot - 90);
      Cell d = heading_vec(rot);
      Cell target{agent.pose.x + d.x, agent.pose.y + d.y};
      if (!scene.walkable(target)) return {StepStatus::Blocked, "target cell not walkable"};
      if (scene.agent_at(target) >= 0) return {StepStatus::Blocked, "target cell occupied"};
      agent.pose.x = target.x;
      agent.pose.y = target.y;
      return {StepStatus::Success, "moved"};
    }
    case ActionType::RotateRight:
      agent.pose.rot = norm_rot(agent.pose.rot + 90);
      return {StepStatus::Success, "rotated"};
    case ActionType::RotateLeft:
      agent.pose.rot = norm_rot(agent.pose.rot - 90);
      return {StepStatus::Success, "rotated"};
    case ActionType::LookUp:
      agent.pose.pitch = std::min(30, agent.pose.pitch + 30);
      return {StepStatus::Success, "pitched"};
    case ActionType::LookDown:
      agent.pose.pitch = std::max(-30, agent.pose.pitch - 30);
      return {StepStatus::Success, "pitched"};
    case ActionType::Stop:
      agent.stopped = true;
      return {StepStatus::Success, "stopped"};
    case ActionType::PickUp: {
      const ObjectInstance& obj = scene.object(action.target);  // throws on unknown id
      if (!agent.held.empty()) return {StepStatus::Invalid, "hand not empty"};
      if (!kb.type(obj.type).pickupable) return {StepStatus::Invalid, "object not pickupable"};
      if (obj.placement.kind == PlaceKind::Held) return {StepStatus::Invalid, "object held elsewhere"};
      Cell c = scene.object_cell(obj);
      long long r = cfg.interaction_range;
      if (dist2(agent.pose.cell(), c) > r * r) return {StepStatus::Invalid, "out of reach"};
      if (!cell_visible(scene, agent.pose, agent.cap.hei, c, effective_height(scene, obj, kb), cfg))
        return {StepStatus::Invalid, "target not visible"};
      scene.place_object(action.target, Placement::held(agent_id));
      agent.held = action.target;
      return {StepStatus::Success, "picked " + action.target};
    }
    case ActionType::PutDown: {
      const ReceptacleInstance& rec =
          scene.receptacles[static_cast<std::size_t>(scene.receptacle_index(action.target))];
      if (agent.held.empty()) return {StepStatus::Invalid, "not holding anything"};
      long long r = cfg.interaction_range;
      bool reachable = false;
      for (const Cell& ic : rec.interaction_cells)
        if (dist2(agent.pose.cell(), ic) <= r * r) reachable = true;
      if (!reachable) return {StepStatus::Invalid, "no interaction cell in reach"};
      if (!cell_visible(scene, agent.pose, agent.cap.hei, rec.cell, kb.surface_height(rec.type), cfg))
        return {StepStatus::Invalid, "receptacle not visible"};
      std::string held = agent.held;
      scene.place_object(held, Placement::on(action.target));
      agent.held.clear();
      return {StepStatus::Success, "placed " + held + " on " + action.target};
    }
    case ActionType::Drop: {
      if (agent.held.empty()) return {StepStatus::Invalid, "not holding anything"};
      std::string held = agent.held;
      scene.place_object(held, Placement::floor(agent.pose.cell()));
      agent.held.clear();
      return {StepStatus::Success, "dropped " + held};
    }
  }
  return {StepStatus::Invalid, "unknown action"};
}

// ---------------------------------------------------------------------------
// Discriminator application
// ---------------------------------------------------------------------------

inline bool discriminate(const Scene& scene, const std::string& object_id, const Ontology& kb) {
  const ObjectInstance& obj = scene.object(object_id);
  if (obj.placement.kind == PlaceKind::Held) return false;  // held = nowhere
  PlacementTriple tr = scene.placement_triple(obj);
  return kb.is_reasonable(tr.object_type, tr.receptacle_type, tr.room_type);
}

// True iff every object in the scene is in a reasonable location and no agent
// holds anything. Intentionally scans all objects, not only a task's k: an
// agent that misplaces a previously fine object breaks completion.
inline bool is_task_complete(const Scene& scene, const Ontology& kb) {
  for (const auto& agent : scene.agents)
    if (!agent.held.empty()) return false;
  for (const auto& obj : scene.objects)
    if (!discriminate(scene, obj.id, kb)) return false;
  return true;
}

}  // namespace tidysim

#pragma once

// Multi-room gridworld scene: occupancy lattice (0.25 m cells), rooms as
// rectangle unions, receptacle instances on furniture cells, object
// placements, and agent embodiment state.
//
// Wall model: every cell not covered by a room rectangle is wall. Receptacle
// cells are inside rooms and are not walkable; their interaction cells are
// the 4-adjacent walkable cells. Floor objects do not block movement.

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "tidysim/errors.hpp"
#include "tidysim/ontology.hpp"
#include "tidysim/rng.hpp"

namespace tidysim {

struct Cell {
  int x = 0;
  int y = 0;
  friend bool operator==(const Cell& a, const Cell& b) { return a.x == b.x && a.y == b.y; }
  friend bool operator!=(const Cell& a, const Cell& b) { return !(a == b); }
  friend bool operator<(const Cell& a, const Cell& b) {
    return a.x != b.x ? a.x < b.x : a.y < b.y;
  }
};

inline long long dist2(Cell a, Cell b) {
  long long dx = a.x - b.x, dy = a.y - b.y;
  return dx * dx + dy * dy;
}

// Headings: 0 = north (-y), 90 = east (+x), 180 = south (+y), 270 = west (-x).
inline Cell heading_vec(int rot) {
  switch (((rot % 360) + 360) % 360) {
    case 0: return {0, -1};
    case 90: return {1, 0};
    case 180: return {0, 1};
    case 270: return {-1, 0};
  }
  throw Error("heading_vec: rot must be a multiple of 90");
}

inline int norm_rot(int rot) { return ((rot % 360) + 360) % 360; }

// Heading that best faces `to` from `from` (dominant axis; |dx|>=|dy| wins x).
inline int facing_rot(Cell from, Cell to) {
  int dx = to.x - from.x, dy = to.y - from.y;
  if (dx == 0 && dy == 0) return 0;
  if (std::abs(dx) >= std::abs(dy)) return dx > 0 ? 90 : 270;
  return dy > 0 ? 180 : 0;
}

// Center-to-center grid ray (Amanatides–Woo). Exact corner crossings step
// diagonally. Returns every visited cell including both endpoints.
inline std::vector<Cell> grid_ray(Cell a, Cell b) {
  std::vector<Cell> out;
  out.push_back(a);
  int nx = std::abs(b.x - a.x), ny = std::abs(b.y - a.y);
  int sx = b.x > a.x ? 1 : -1, sy = b.y > a.y ? 1 : -1;
  int x = a.x, y = a.y, ix = 0, iy = 0;
  while (ix < nx || iy < ny) {
    // Param of next half-integer crossing: (1+2*ix)/(2*nx) vs (1+2*iy)/(2*ny)
    long long tx = static_cast<long long>(1 + 2 * ix) * ny;
    long long ty = static_cast<long long>(1 + 2 * iy) * nx;
    if (ny == 0 || (nx != 0 && tx < ty)) {
      x += sx;
      ++ix;
    } else if (nx == 0 || tx > ty) {
      y += sy;
      ++iy;
    } else {  // corner
      x += sx;
      y += sy;
      ++ix;
      ++iy;
    }
    out.push_back({x, y});
  }
  return out;
}

struct Rect {
  int x0 = 0, y0 = 0, x1 = 0, y1 = 0;  // inclusive
  bool contains(Cell c) const { return c.x >= x0 && c.x <= x1 && c.y >= y0 && c.y <= y1; }
};

struct RoomDef {
  std::string id;
  std::string type;  // one of kRoomOrder
  std::vector<Rect> rects;
};

struct ReceptacleInstance {
  std::string id;
  std::string type;
  Cell cell;
  int room = -1;                        // index into Scene::rooms
  std::vector<Cell> interaction_cells;  // adjacent walkable cells, sorted
};

enum class PlaceKind { OnReceptacle, OnFloor, Held };

struct Placement {
  PlaceKind kind = PlaceKind::OnFloor;
  std::string receptacle_id;  // OnReceptacle
  Cell cell;                  // OnFloor
  int held_by = -1;           // Held

  static Placement on(const std::string& recep_id) {
    return Placement{PlaceKind::OnReceptacle, recep_id, {}, -1};
  }
  static Placement floor(Cell c) { return Placement{PlaceKind::OnFloor, "", c, -1}; }
  static Placement held(int agent) { return Placement{PlaceKind::Held, "", {}, agent}; }

  friend bool operator==(const Placement& a, const Placement& b) {
    return a.kind == b.kind && a.receptacle_id == b.receptacle_id && a.cell == b.cell &&
           a.held_by == b.held_by;
  }
};

struct ObjectInstance {
  std::string id;
  std::string type;
  Placement placement;
};

struct CapabilityVector {
  int nav = 1;
  int mani = 0;
  int hei = 0;
  friend bool operator==(const CapabilityVector& a, const CapabilityVector& b) {
    return a.nav == b.nav && a.mani == b.mani && a.hei == b.hei;
  }
};

struct Pose {
  int x = 0;
  int y = 0;
  int rot = 0;    // {0, 90, 180, 270}
  int pitch = 0;  // {-30, 0, 30}
  Cell cell() const { return {x, y}; }
  friend bool operator==(const Pose& a, const Pose& b) {
    return a.x == b.x && a.y == b.y && a.rot == b.rot && a.pitch == b.pitch;
  }
};

struct AgentState {
  CapabilityVector cap;
  Pose pose;
  std::string held;  // object id, empty if hand free
  bool stopped = false;
};

class Scene {
 public:
  std::string name;
  int width = 0;
  int height = 0;
  std::vector<RoomDef> rooms;
  std::vector<ReceptacleInstance> receptacles;
  std::vector<ObjectInstance> objects;
  std::vector<AgentState> agents;

  bool in_bounds(Cell c) const { return c.x >= 0 && c.x < width && c.y >= 0 && c.y < height; }
  int room_of(Cell c) const { return in_bounds(c) ? room_of_[idx(c)] : -1; }
  bool is_wall(Cell c) const { return !in_bounds(c) || room_of_[idx(c)] < 0; }
  int receptacle_at(Cell c) const { return in_bounds(c) ? recep_at_[idx(c)] : -1; }

  // Walkable: inside a room and not occupied by furniture. Agents and floor
  // objects do not make a cell unwalkable; agent collisions are checked by
  // the action layer.
  bool walkable(Cell c) const { return !is_wall(c) && receptacle_at(c) < 0; }

  int agent_at(Cell c) const {
    for (std::size_t i = 0; i < agents.size(); ++i)
      if (agents[i].pose.cell() == c) return static_cast<int>(i);
    return -1;
  }

  int receptacle_index(const std::string& id) const {
    auto it = recep_index_.find(id);
    if (it == recep_index_.end()) throw LookupError("unknown receptacle id '" + id + "'");
    return it->second;
  }
  int object_index(const std::string& id) const {
    auto it = object_index_.find(id);
    if (it == object_index_.end()) throw LookupError("unknown object id '" + id + "'");
    return it->second;
  }
  bool has_object(const std::string& id) const { return object_index_.count(id) > 0; }

  const ReceptacleInstance& receptacle(const std::string& id) const {
    return receptacles[static_cast<std::size_t>(receptacle_index(id))];
  }
  const ObjectInstance& object(const std::string& id) const {
    return objects[static_cast<std::size_t>(object_index(id))];
  }

  // Physical cell of an object; held objects are nowhere (throws).
  Cell object_cell(const ObjectInstance& obj) const {
    switch (obj.placement.kind) {
      case PlaceKind::OnFloor: return obj.placement.cell;
      case PlaceKind::OnReceptacle: return receptacle(obj.placement.receptacle_id).cell;
      case PlaceKind::Held: throw Error("object '" + obj.id + "' is held and has no cell");
    }
    throw Error("bad placement");
  }

  int object_room(const ObjectInstance& obj) const {
    switch (obj.placement.kind) {
      case PlaceKind::OnFloor: return room_of(obj.placement.cell);
      case PlaceKind::OnReceptacle: return receptacle(obj.placement.receptacle_id).room;
      case PlaceKind::Held: return -1;
    }
    return -1;
  }

  // Placement triple as type names: (object type, receptacle type or Floor,
  // room type). Held objects have no triple (throws).
  PlacementTriple placement_triple(const ObjectInstance& obj) const {
    if (obj.placement.kind == PlaceKind::Held)
      throw Error("object '" + obj.id + "' is held and has no placement triple");
    std::string on = obj.placement.kind == PlaceKind::OnFloor
                         ? kFloor
                         : receptacle(obj.placement.receptacle_id).type;
    int room = object_room(obj);
    return PlacementTriple{obj.type, on, rooms[static_cast<std::size_t>(room)].type};
  }

  std::vector<Cell> walkable_cells() const {
    std::vector<Cell> out;
    for (int y = 0; y < height; ++y)
      for (int x = 0; x < width; ++x)
        if (walkable({x, y})) out.push_back({x, y});
    return out;
  }

  // ---- mutation helpers used by the action layer (invariant-preserving) ----

  void place_object(const std::string& obj_id, const Placement& p) {
    ObjectInstance& obj = objects[static_cast<std::size_t>(object_index(obj_id))];
    if (p.kind == PlaceKind::OnReceptacle) receptacle_index(p.receptacle_id);  // must exist
    if (p.kind == PlaceKind::OnFloor && !walkable(p.cell))
      throw Error("cannot place '" + obj_id + "' on non-walkable cell");
    obj.placement = p;
  }

  // ---- serialization ----

  nlohmann::json to_json() const {
    nlohmann::json j;
    j["schema_version"] = 1;
    j["name"] = name;
    j["width"] = width;
    j["height"] = height;
    j["rooms"] = nlohmann::json::array();
    for (const auto& r : rooms) {
      nlohmann::json jr;
      jr["id"] = r.id;
      jr["type"] = r.type;
      jr["rects"] = nlohmann::json::array();
      for (const auto& rc : r.rects) jr["rects"].push_back({rc.x0, rc.y0, rc.x1, rc.y1});
      j["rooms"].push_back(jr);
    }
    j["receptacles"] = nlohmann::json::array();
    for (const auto& rec : receptacles)
      j["receptacles"].push_back({{"id", rec.id}, {"type", rec.type}, {"cell", {rec.cell.x, rec.cell.y}}});
    j["objects"] = nlohmann::json::array();
    for (const auto& obj : objects) {
      nlohmann::json jo{{"id", obj.id}, {"type", obj.type}};
      switch (obj.placement.kind) {
        case PlaceKind::OnReceptacle: jo["on"] = obj.placement.receptacle_id; break;
        case PlaceKind::OnFloor: jo["floor"] = {obj.placement.cell.x, obj.placement.cell.y}; break;
        case PlaceKind::Held: jo["held_by"] = obj.placement.held_by; break;
      }
      j["objects"].push_back(jo);
    }
    j["agents"] = nlohmann::json::array();
    for (const auto& a : agents) {
      j["agents"].push_back({{"nav", a.cap.nav},
                             {"mani", a.cap.mani},
                             {"hei", a.cap.hei},
                             {"x", a.pose.x},
                             {"y", a.pose.y},
                             {"rot", a.pose.rot},
                             {"pitch", a.pose.pitch},
                             {"held", a.held},
                             {"stopped", a.stopped}});
    }
    return j;
  }

  static Scene from_json(const nlohmann::json& j, const Ontology& kb) {
    Scene s;
    if (!j.is_object()) throw SchemaError("scene: document must be an object");
    for (const char* field : {"schema_version", "name", "width", "height", "rooms",
                              "receptacles", "objects"})
      if (!j.contains(field)) throw SchemaError(std::string("scene: missing field '") + field + "'");
    s.name = j["name"].get<std::string>();
    s.width = j["width"].get<int>();
    s.height = j["height"].get<int>();
    if (s.width <= 0 || s.height <= 0) throw SchemaError("scene: non-positive dimensions");

    for (const auto& jr : j["rooms"]) {
      RoomDef r;
      r.id = jr.at("id").get<std::string>();
      r.type = jr.at("type").get<std::string>();
      for (const auto& rc : jr.at("rects")) {
        if (!rc.is_array() || rc.size() != 4) throw SchemaError("scene: rect must be [x0,y0,x1,y1]");
        r.rects.push_back(Rect{rc[0].get<int>(), rc[1].get<int>(), rc[2].get<int>(), rc[3].get<int>()});
      }
      s.rooms.push_back(std::move(r));
    }
    for (const auto& jr : j["receptacles"]) {
      ReceptacleInstance rec;
      rec.id = jr.at("id").get<std::string>();
      rec.type = jr.at("type").get<std::string>();
      rec.cell = Cell{jr.at("cell")[0].get<int>(), jr.at("cell")[1].get<int>()};
      s.receptacles.push_back(std::move(rec));
    }
    for (const auto& jo : j["objects"]) {
      ObjectInstance obj;
      obj.id = jo.at("id").get<std::string>();
      obj.type = jo.at("type").get<std::string>();
      if (jo.contains("on"))
        obj.placement = Placement::on(jo["on"].get<std::string>());
      else if (jo.contains("floor"))
        obj.placement = Placement::floor(Cell{jo["floor"][0].get<int>(), jo["floor"][1].get<int>()});
      else if (jo.contains("held_by"))
        obj.placement = Placement::held(jo["held_by"].get<int>());
      else
        throw SchemaError("scene: object '" + obj.id + "' has no placement");
      s.objects.push_back(std::move(obj));
    }
    if (j.contains("agents")) {
      for (const auto& ja : j["agents"]) {
        AgentState a;
        a.cap.nav = ja.at("nav").get<int>();
        a.cap.mani = ja.at("mani").get<int>();
        a.cap.hei = ja.at("hei").get<int>();
        a.pose.x = ja.at("x").get<int>();
        a.pose.y = ja.at("y").get<int>();
        a.pose.rot = ja.at("rot").get<int>();
        a.pose.pitch = ja.value("pitch", 0);
        a.held = ja.value("held", std::string());
        a.stopped = ja.value("stopped", false);
        s.agents.push_back(a);
      }
    }
    s.finalize(kb);
    return s;
  }

  static Scene load(const std::string& path, const Ontology& kb) {
    std::ifstream in(path);
    if (!in) throw SchemaError("scene: cannot open '" + path + "'");
    nlohmann::json j;
    try {
      in >> j;
    } catch (const nlohmann::json::exception& e) {
      throw SchemaError("scene: parse failure in '" + path + "': " + e.what());
    }
    return from_json(j, kb);
  }

  void save(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw Error("scene: cannot write '" + path + "'");
    out << to_json().dump(2) << "\n";
  }

  std::string canonical() const { return to_json().dump(); }
  std::string hash() const { return hash_hex(fnv1a64(canonical())); }

  friend bool operator==(const Scene& a, const Scene& b) { return a.canonical() == b.canonical(); }

  // Rebuild derived lookups and check every invariant. Must be called after
  // any structural edit done outside the action layer.
  void finalize(const Ontology& kb) {
    std::vector<std::string> problems;
    room_of_.assign(static_cast<std::size_t>(width * height), -1);
    recep_at_.assign(static_cast<std::size_t>(width * height), -1);

    for (std::size_t ri = 0; ri < rooms.size(); ++ri) {
      const RoomDef& r = rooms[ri];
      bool room_known = true;
      try {
        Ontology::room_index(r.type);
      } catch (const LookupError&) {
        problems.push_back("room '" + r.id + "' has unknown type '" + r.type + "'");
        room_known = false;
      }
      (void)room_known;
      for (const Rect& rc : r.rects) {
        if (rc.x0 > rc.x1 || rc.y0 > rc.y1 || rc.x0 < 0 || rc.y0 < 0 || rc.x1 >= width ||
            rc.y1 >= height) {
          problems.push_back("room '" + r.id + "' has a rect out of bounds");
          continue;
        }
        for (int y = rc.y0; y <= rc.y1; ++y)
          for (int x = rc.x0; x <= rc.x1; ++x) {
            int& slot = room_of_[idx({x, y})];
            if (slot >= 0 && slot != static_cast<int>(ri))
              problems.push_back("rooms '" + rooms[static_cast<std::size_t>(slot)].id + "' and '" +
                                 r.id + "' overlap at (" + std::to_string(x) + "," +
                                 std::to_string(y) + ")");
            slot = static_cast<int>(ri);
          }
      }
    }

    recep_index_.clear();
    for (std::size_t i = 0; i < receptacles.size(); ++i) {
      ReceptacleInstance& rec = receptacles[i];
      if (recep_index_.count(rec.id)) problems.push_back("duplicate receptacle id '" + rec.id + "'");
      recep_index_[rec.id] = static_cast<int>(i);
      if (!kb.has_type(rec.type) || !kb.type(rec.type).receptacle) {
        problems.push_back("receptacle '" + rec.id + "' has non-receptacle type '" + rec.type + "'");
        continue;
      }
      if (!in_bounds(rec.cell) || room_of_[idx(rec.cell)] < 0) {
        problems.push_back("receptacle '" + rec.id + "' is on a wall cell");
        continue;
      }
      rec.room = room_of_[idx(rec.cell)];
      int& slot = recep_at_[idx(rec.cell)];
      if (slot >= 0)
        problems.push_back("receptacles '" + receptacles[static_cast<std::size_t>(slot)].id +
                           "' and '" + rec.id + "' share a cell");
      slot = static_cast<int>(i);
    }
    // Interaction cells depend on all furniture being placed.
    for (auto& rec : receptacles) {
      rec.interaction_cells.clear();
      for (Cell d : {Cell{0, -1}, Cell{1, 0}, Cell{0, 1}, Cell{-1, 0}}) {
        Cell c{rec.cell.x + d.x, rec.cell.y + d.y};
        if (walkable(c)) rec.interaction_cells.push_back(c);
      }
      std::sort(rec.interaction_cells.begin(), rec.interaction_cells.end());
      if (rec.interaction_cells.empty())
        problems.push_back("receptacle '" + rec.id + "' has no interaction cell");
    }

    object_index_.clear();
    for (std::size_t i = 0; i < objects.size(); ++i) {
      const ObjectInstance& obj = objects[i];
      if (object_index_.count(obj.id)) problems.push_back("duplicate object id '" + obj.id + "'");
      object_index_[obj.id] = static_cast<int>(i);
      if (!kb.has_type(obj.type)) {
        problems.push_back("object '" + obj.id + "' has unknown type '" + obj.type + "'");
        continue;
      }
      switch (obj.placement.kind) {
        case PlaceKind::OnReceptacle:
          if (!recep_index_.count(obj.placement.receptacle_id))
            problems.push_back("object '" + obj.id + "' rests on unknown receptacle '" +
                               obj.placement.receptacle_id + "'");
          break;
        case PlaceKind::OnFloor:
          if (!walkable(obj.placement.cell))
            problems.push_back("object '" + obj.id + "' rests on a non-walkable floor cell");
          break;
        case PlaceKind::Held: {
          int a = obj.placement.held_by;
          if (a < 0 || a >= static_cast<int>(agents.size()) ||
              agents[static_cast<std::size_t>(a)].held != obj.id)
            problems.push_back("object '" + obj.id + "' held_by does not match any agent");
          break;
        }
      }
    }

    std::set<Cell> agent_cells;
    for (std::size_t i = 0; i < agents.size(); ++i) {
      const AgentState& a = agents[i];
      if (a.cap.nav != 1) problems.push_back("agent " + std::to_string(i) + " must have nav=1");
      if (!walkable(a.pose.cell()))
        problems.push_back("agent " + std::to_string(i) + " is on a non-walkable cell");
      if (!agent_cells.insert(a.pose.cell()).second)
        problems.push_back("two agents share cell (" + std::to_string(a.pose.x) + "," +
                           std::to_string(a.pose.y) + ")");
      if (norm_rot(a.pose.rot) % 90 != 0) problems.push_back("agent rot must be a multiple of 90");
      if (a.pose.pitch != -30 && a.pose.pitch != 0 && a.pose.pitch != 30)
        problems.push_back("agent pitch must be in {-30, 0, 30}");
      if (!a.held.empty()) {
        if (a.cap.mani != 1)
          problems.push_back("agent " + std::to_string(i) + " holds an object but has mani=0");
        if (!object_index_.count(a.held) ||
            !(objects[static_cast<std::size_t>(object_index_.at(a.held))].placement ==
              Placement::held(static_cast<int>(i))))
          problems.push_back("agent " + std::to_string(i) + " held object inconsistent");
      }
    }

    if (!problems.empty()) {
      std::ostringstream os;
      os << "scene validation failed (" << problems.size() << " problem(s)):";
      for (const auto& p : problems) os << "\n  - " << p;
      throw ValidationError(os.str());
    }
  }

 private:
  std::size_t idx(Cell c) const { return static_cast<std::size_t>(c.y * width + c.x); }

  std::vector<int> room_of_;
  std::vector<int> recep_at_;
  std::map<std::string, int> recep_index_;
  std::map<std::string, int> object_index_;
};

}  // namespace tidysim

#pragma once

// Placement ontology: the object/receptacle/room type universe and the set of
// reasonable-placement triples. This is the knowledge base behind the
// discriminator D used everywhere else as ground truth.
//
// File format (JSON, human-editable, versioned):
//   {
//     "schema_version": 1,
//     "object_types": [
//       {"name": "Mug", "pickupable": true, "receptacle": false,
//        "height_class": "low-surface"},
//       ...
//     ],
//     "room_types": ["Kitchen", "LivingRoom", "Bedroom", "Bathroom"],
//     "triples": [["Mug", "CounterTop", "Kitchen"], ...]
//   }
//
// "Floor" is a reserved pseudo-receptacle: it exists in every room, may not
// be declared as a type, and may not appear in any triple — so a floor
// placement is never reasonable.

#include <algorithm>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "tidysim/errors.hpp"

namespace tidysim {

inline const std::string kFloor = "Floor";

// Canonical room order; also the tie-break order for room classification.
inline const std::vector<std::string> kRoomOrder = {"Kitchen", "LivingRoom", "Bedroom",
                                                    "Bathroom"};

enum class HeightClass { FloorLevel, LowSurface, HighSurface };

inline std::string to_string(HeightClass h) {
  switch (h) {
    case HeightClass::FloorLevel: return "floor-level";
    case HeightClass::LowSurface: return "low-surface";
    case HeightClass::HighSurface: return "high-surface";
  }
  return "?";
}

inline HeightClass height_class_from_string(const std::string& s) {
  if (s == "floor-level") return HeightClass::FloorLevel;
  if (s == "low-surface") return HeightClass::LowSurface;
  if (s == "high-surface") return HeightClass::HighSurface;
  throw SchemaError("unknown height_class '" + s + "'");
}

struct TypeInfo {
  std::string name;
  bool pickupable = false;
  bool receptacle = false;
  HeightClass height = HeightClass::LowSurface;
};

struct PlacementTriple {
  std::string object_type;
  std::string receptacle_type;
  std::string room_type;

  friend bool operator<(const PlacementTriple& a, const PlacementTriple& b) {
    return std::tie(a.object_type, a.receptacle_type, a.room_type) <
           std::tie(b.object_type, b.receptacle_type, b.room_type);
  }
  friend bool operator==(const PlacementTriple& a, const PlacementTriple& b) {
    return std::tie(a.object_type, a.receptacle_type, a.room_type) ==
           std::tie(b.object_type, b.receptacle_type, b.room_type);
  }
};

class Ontology {
 public:
  // Throws SchemaError on malformed input, ValidationError (listing every
  // failure) on invariant violations.
  static Ontology from_json(const nlohmann::json& j) {
    Ontology kb;
    if (!j.is_object()) throw SchemaError("ontology: document must be an object");
    if (!j.contains("schema_version") || !j["schema_version"].is_number_integer())
      throw SchemaError("ontology: missing integer schema_version");
    if (!j.contains("object_types") || !j["object_types"].is_array())
      throw SchemaError("ontology: missing object_types array");
    if (!j.contains("room_types") || !j["room_types"].is_array())
      throw SchemaError("ontology: missing room_types array");
    if (!j.contains("triples") || !j["triples"].is_array())
      throw SchemaError("ontology: missing triples array");

    for (const auto& t : j["object_types"]) {
      if (!t.is_object() || !t.contains("name") || !t["name"].is_string())
        throw SchemaError("ontology: object_types entry without a string name");
      TypeInfo info;
      info.name = t["name"].get<std::string>();
      if (info.name == kFloor)
        throw SchemaError("ontology: '" + kFloor + "' is reserved and may not be declared");
      info.pickupable = t.value("pickupable", false);
      info.receptacle = t.value("receptacle", false);
      info.height = height_class_from_string(t.value("height_class", std::string("low-surface")));
      if (kb.type_index_.count(info.name))
        throw SchemaError("ontology: duplicate type name '" + info.name + "'");
      kb.type_index_[info.name] = 0;  // placeholder, re-indexed below
      kb.types_.push_back(std::move(info));
    }
    std::sort(kb.types_.begin(), kb.types_.end(),
              [](const TypeInfo& a, const TypeInfo& b) { return a.name < b.name; });
    for (std::size_t i = 0; i < kb.types_.size(); ++i) kb.type_index_[kb.types_[i].name] = static_cast<int>(i);

    for (const auto& r : j["room_types"]) {
      if (!r.is_string()) throw SchemaError("ontology: room_types entries must be strings");
      kb.file_rooms_.push_back(r.get<std::string>());
    }

    for (const auto& tr : j["triples"]) {
      if (!tr.is_array() || tr.size() != 3 || !tr[0].is_string() || !tr[1].is_string() ||
          !tr[2].is_string())
        throw SchemaError("ontology: each triple must be an array of three names");
      kb.triples_.insert(PlacementTriple{tr[0].get<std::string>(), tr[1].get<std::string>(),
                                         tr[2].get<std::string>()});
    }

    kb.validate();
    kb.build_indexes();
    return kb;
  }

  static Ontology load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw SchemaError("ontology: cannot open '" + path + "'");
    nlohmann::json j;
    try {
      in >> j;
    } catch (const nlohmann::json::exception& e) {
      throw SchemaError("ontology: parse failure in '" + path + "': " + e.what());
    }
    return from_json(j);
  }

  // The discriminator D. True iff (o,p,r) is a sanctioned triple. Floor
  // placements are always false since Floor appears in no triple.
  bool is_reasonable(const std::string& o_type, const std::string& p_type,
                     const std::string& r_type) const {
    require_type(o_type);
    if (p_type != kFloor) require_type(p_type);
    require_room(r_type);
    return triples_.count(PlacementTriple{o_type, p_type, r_type}) > 0;
  }

  // All and only the (receptacle, room) pairs forming a triple with o_type,
  // lexicographic by receptacle then room.
  std::vector<std::pair<std::string, std::string>> candidate_locations(
      const std::string& o_type) const {
    const TypeInfo& info = type(o_type);
    if (!info.pickupable)
      throw Error("candidate_locations: type '" + o_type + "' is not pickupable");
    std::vector<std::pair<std::string, std::string>> out;
    // triples_ is ordered (object, receptacle, room), so the slice for
    // o_type is already in the required order.
    for (auto it = triples_.lower_bound(PlacementTriple{o_type, "", ""});
         it != triples_.end() && it->object_type == o_type; ++it)
      out.emplace_back(it->receptacle_type, it->room_type);
    return out;
  }

  bool has_type(const std::string& name) const {
    return name == kFloor || type_index_.count(name) > 0;
  }

  const TypeInfo& type(const std::string& name) const {
    auto it = type_index_.find(name);
    if (it == type_index_.end()) throw LookupError("unknown type '" + name + "'");
    return types_[static_cast<std::size_t>(it->second)];
  }

  int type_index(const std::string& name) const {
    auto it = type_index_.find(name);
    if (it == type_index_.end()) throw LookupError("unknown type '" + name + "'");
    return it->second;
  }

  // Effective surface height of a receptacle type ("Floor" allowed).
  HeightClass surface_height(const std::string& p_type) const {
    if (p_type == kFloor) return HeightClass::FloorLevel;
    return type(p_type).height;
  }

  static int room_index(const std::string& room) {
    for (std::size_t i = 0; i < kRoomOrder.size(); ++i)
      if (kRoomOrder[i] == room) return static_cast<int>(i);
    throw LookupError("unknown room type '" + room + "'");
  }

  int pickupable_index(const std::string& name) const {
    auto it = std::lower_bound(pickupable_types_.begin(), pickupable_types_.end(), name);
    if (it == pickupable_types_.end() || *it != name)
      throw LookupError("'" + name + "' is not a pickupable type");
    return static_cast<int>(it - pickupable_types_.begin());
  }

  int receptacle_index(const std::string& name) const {
    auto it = std::lower_bound(receptacle_types_.begin(), receptacle_types_.end(), name);
    if (it == receptacle_types_.end() || *it != name)
      throw LookupError("'" + name + "' is not a receptacle type");
    return static_cast<int>(it - receptacle_types_.begin());
  }

  const std::vector<TypeInfo>& types() const { return types_; }
  const std::set<PlacementTriple>& triples() const { return triples_; }
  const std::vector<std::string>& pickupable_types() const { return pickupable_types_; }
  const std::vector<std::string>& receptacle_types() const { return receptacle_types_; }
  int k_total() const { return static_cast<int>(types_.size()); }
  int k_pick() const { return static_cast<int>(pickupable_types_.size()); }
  int k_recep() const { return static_cast<int>(receptacle_types_.size()); }

  friend bool operator==(const Ontology& a, const Ontology& b) {
    auto key = [](const Ontology& kb) {
      std::ostringstream os;
      for (const auto& t : kb.types_)
        os << t.name << '|' << t.pickupable << t.receptacle << static_cast<int>(t.height) << ';';
      for (const auto& tr : kb.triples_)
        os << tr.object_type << ',' << tr.receptacle_type << ',' << tr.room_type << ';';
      return os.str();
    };
    return key(a) == key(b);
  }

 private:
  void require_type(const std::string& name) const {
    if (!type_index_.count(name)) throw LookupError("unknown type '" + name + "'");
  }
  static void require_room(const std::string& name) { room_index(name); }

  void validate() const {
    std::vector<std::string> problems;

    std::set<std::string> rooms(file_rooms_.begin(), file_rooms_.end());
    if (file_rooms_.size() != 4 || rooms != std::set<std::string>(kRoomOrder.begin(), kRoomOrder.end()))
      problems.push_back("room_types must be exactly {Kitchen, LivingRoom, Bedroom, Bathroom}");

    std::set<std::string> in_some_triple;
    for (const auto& tr : triples_) {
      in_some_triple.insert(tr.object_type);
      if (tr.receptacle_type == kFloor)
        problems.push_back("triple (" + tr.object_type + ", Floor, " + tr.room_type +
                           "): Floor may not appear in a triple");
      for (const std::string* name : {&tr.object_type, &tr.receptacle_type}) {
        if (!type_index_.count(*name))
          problems.push_back("triple names unknown type '" + *name + "'");
      }
      if (!rooms.count(tr.room_type))
        problems.push_back("triple names unknown room '" + tr.room_type + "'");
      if (type_index_.count(tr.object_type) && !types_[static_cast<std::size_t>(type_index_.at(tr.object_type))].pickupable)
        problems.push_back("triple object '" + tr.object_type + "' is not pickupable");
      if (type_index_.count(tr.receptacle_type) &&
          !types_[static_cast<std::size_t>(type_index_.at(tr.receptacle_type))].receptacle)
        problems.push_back("triple receptacle '" + tr.receptacle_type + "' lacks the receptacle flag");
    }
    for (const auto& t : types_) {
      if (t.pickupable && !in_some_triple.count(t.name))
        problems.push_back("pickupable type '" + t.name +
                           "' appears in no triple (no reasonable home exists)");
    }

    if (!problems.empty()) {
      std::ostringstream os;
      os << "ontology validation failed (" << problems.size() << " problem(s)):";
      for (const auto& p : problems) os << "\n  - " << p;
      throw ValidationError(os.str());
    }
  }

  void build_indexes() {
    for (const auto& t : types_) {
      if (t.pickupable) pickupable_types_.push_back(t.name);
      if (t.receptacle) receptacle_types_.push_back(t.name);
    }
    // types_ is sorted already, so these are sorted too.
  }

  std::vector<TypeInfo> types_;  // sorted by name; index = stable type id
  std::map<std::string, int> type_index_;
  std::vector<std::string> file_rooms_;
  std::set<PlacementTriple> triples_;
  std::vector<std::string> pickupable_types_;
  std::vector<std::string> receptacle_types_;
};

}  // namespace tidysim

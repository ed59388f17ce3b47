#include <catch2/catch_amalgamated.hpp>

#include <set>

#include "fixtures.hpp"
#include "tidysim/ontology.hpp"

using namespace tidysim;

TEST_CASE("shipped default ontology loads with the four fixed room types") {
  const Ontology& kb = fx::default_ontology();
  CHECK(kb.k_pick() >= 20);
  CHECK(kb.k_recep() >= 12);
  for (const auto& room : kRoomOrder) CHECK_NOTHROW(Ontology::room_index(room));
  CHECK(Ontology::room_index("Kitchen") == 0);
  CHECK(Ontology::room_index("Bathroom") == 3);
}

TEST_CASE("triple naming an unknown type is a validation error") {
  auto j = fx::toy_ontology_json();
  j["triples"].push_back(nlohmann::json::array({"Ghost", "Table", "Kitchen"}));
  CHECK_THROWS_AS(Ontology::from_json(j), ValidationError);
  try {
    Ontology::from_json(j);
  } catch (const ValidationError& e) {
    CHECK(std::string(e.what()).find("Ghost") != std::string::npos);
  }
}

TEST_CASE("pickupable type in zero triples is a validation error") {
  auto j = fx::toy_ontology_json();
  j["object_types"].push_back({{"name", "Orphan"},
                               {"pickupable", true},
                               {"receptacle", false},
                               {"height_class", "low-surface"}});
  CHECK_THROWS_AS(Ontology::from_json(j), ValidationError);
}

TEST_CASE("room set must be exactly the four paper rooms") {
  auto j = fx::toy_ontology_json();
  j["room_types"] = nlohmann::json::array({"Kitchen", "LivingRoom", "Bedroom"});
  CHECK_THROWS_AS(Ontology::from_json(j), ValidationError);
}

TEST_CASE("Floor is reserved: not declarable, never in a triple") {
  auto declared = fx::toy_ontology_json();
  declared["object_types"].push_back({{"name", "Floor"},
                                      {"pickupable", false},
                                      {"receptacle", true},
                                      {"height_class", "floor-level"}});
  CHECK_THROWS_AS(Ontology::from_json(declared), SchemaError);

  auto in_triple = fx::toy_ontology_json();
  in_triple["triples"].push_back(nlohmann::json::array({"Ball", "Floor", "Kitchen"}));
  CHECK_THROWS_AS(Ontology::from_json(in_triple), ValidationError);
}

TEST_CASE("is_reasonable: membership, Floor always unreasonable, unknown names") {
  Ontology kb = fx::toy_ontology();
  for (const auto& tr : kb.triples())
    CHECK(kb.is_reasonable(tr.object_type, tr.receptacle_type, tr.room_type));
  CHECK_FALSE(kb.is_reasonable("Ball", kFloor, "Kitchen"));
  CHECK_FALSE(kb.is_reasonable("Ball", kFloor, "LivingRoom"));
  CHECK_THROWS_AS(kb.is_reasonable("Ghost", "Table", "Kitchen"), LookupError);
  CHECK_THROWS_AS(kb.is_reasonable("Ball", "Table", "Pantry"), LookupError);
}

// Oracle: naive scan over the triple set, quantified over the whole toy
// universe.
TEST_CASE("is_reasonable agrees with a direct set scan on the toy ontology") {
  Ontology kb = fx::toy_ontology();
  std::set<std::tuple<std::string, std::string, std::string>> raw;
  for (const auto& tr : kb.triples()) raw.insert({tr.object_type, tr.receptacle_type, tr.room_type});
  for (const auto& o : kb.types()) {
    for (const auto& p : kb.types()) {
      for (const auto& room : kRoomOrder) {
        bool naive = raw.count({o.name, p.name, room}) > 0;
        CHECK(kb.is_reasonable(o.name, p.name, room) == naive);
      }
    }
  }
}

TEST_CASE("candidate_locations: ordering, singleton, full reconstruction") {
  Ontology kb = fx::toy_ontology();

  auto ball = kb.candidate_locations("Ball");
  REQUIRE(ball.size() == 1);
  CHECK(ball[0] == std::pair<std::string, std::string>("Box", "LivingRoom"));

  auto cup = kb.candidate_locations("Cup");
  REQUIRE(cup.size() == 3);
  CHECK(std::is_sorted(cup.begin(), cup.end()));

  CHECK_THROWS(kb.candidate_locations("Table"));  // not pickupable

  // Oracle: the union over all pickupable types reconstructs the triple set.
  std::set<PlacementTriple> rebuilt;
  for (const auto& name : kb.pickupable_types())
    for (const auto& [p, r] : kb.candidate_locations(name))
      rebuilt.insert(PlacementTriple{name, p, r});
  CHECK(rebuilt == kb.triples());
}

TEST_CASE("is_reasonable iff pair in candidate_locations, for all pickupables") {
  Ontology kb = fx::toy_ontology();
  for (const auto& o : kb.pickupable_types()) {
    auto cands = kb.candidate_locations(o);
    std::set<std::pair<std::string, std::string>> cand_set(cands.begin(), cands.end());
    for (const auto& p : kb.types()) {
      for (const auto& room : kRoomOrder) {
        CHECK(kb.is_reasonable(o, p.name, room) == (cand_set.count({p.name, room}) > 0));
      }
    }
  }
}

TEST_CASE("identical file bytes give identical ontology values") {
  auto j = fx::toy_ontology_json();
  Ontology a = Ontology::from_json(j);
  Ontology b = Ontology::from_json(nlohmann::json::parse(j.dump()));
  CHECK(a == b);
}

TEST_CASE("type indices are stable and sorted") {
  const Ontology& kb = fx::default_ontology();
  CHECK(std::is_sorted(kb.pickupable_types().begin(), kb.pickupable_types().end()));
  CHECK(std::is_sorted(kb.receptacle_types().begin(), kb.receptacle_types().end()));
  CHECK(kb.pickupable_index(kb.pickupable_types().front()) == 0);
  CHECK(kb.surface_height(kFloor) == HeightClass::FloorLevel);
}

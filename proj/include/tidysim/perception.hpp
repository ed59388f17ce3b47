#pragma once

// Per-agent semantic mapping, misplaced-object detection, room classification
// from observed anchor receptacles, and reasonable-receptacle prediction.
//
// The floor-plan geometry (walls, room boundaries) is known to the mapper;
// room *types* are not — they are inferred from anchors via the knowledge
// base. Detection is exact symbolic perception plus parametric flip noise.

#include <map>
#include <set>
#include <string>
#include <vector>

#include "tidysim/ontology.hpp"
#include "tidysim/rng.hpp"
#include "tidysim/world.hpp"

namespace tidysim {

struct DetectorNoise {
  double fp = 0.0;  // P(det 0 -> 1)
  double fn = 0.0;  // P(det 1 -> 0)
};

struct Detection {
  std::string object_id;
  int det = 0;  // 1 = misplaced
  PlacementTriple observed;
  Cell cell;  // where the object was seen
  int round = 0;
};

struct InstanceNote {
  std::string id;
  std::string type;
  bool is_receptacle = false;
  std::string on_type;  // objects only: receptacle type or Floor
  std::string on_id;
  std::string room_type;  // as observed (ground truth at observation time)
  Cell cell;
  int region = -1;  // floor-plan region the entity sits in
  int round = 0;    // last seen
};

struct RoomGuess {
  std::string type;
  bool confident = true;
};

class SemanticMap {
 public:
  SemanticMap() = default;

  // Geometry (regions + walls) comes from the scene; types do not.
  explicit SemanticMap(const Scene& scene, int local_size = 20)
      : G_(local_size), width_(scene.width), height_(scene.height) {
    region_of_.resize(static_cast<std::size_t>(width_ * height_));
    room_area_ = 0;
    for (int y = 0; y < height_; ++y)
      for (int x = 0; x < width_; ++x) {
        int r = scene.room_of({x, y});
        region_of_[idx({x, y})] = r;
        if (r >= 0) ++room_area_;
      }
    n_regions_ = static_cast<int>(scene.rooms.size());
    explored_.assign(region_of_.size(), 0);
    obstacle_.assign(region_of_.size(), 0);
  }

  int local_size() const { return G_; }
  int regions() const { return n_regions_; }
  int region_at(Cell c) const { return in_bounds(c) ? region_of_[idx(c)] : -1; }
  bool explored(Cell c) const { return in_bounds(c) && explored_[idx(c)] != 0; }
  bool obstacle_seen(Cell c) const { return in_bounds(c) && obstacle_[idx(c)] != 0; }
  int explored_count() const { return explored_count_; }

  // Fraction of room-area cells not yet explored.
  double unexplored_fraction() const {
    if (room_area_ == 0) return 0.0;
    return 1.0 - static_cast<double>(explored_count_) / static_cast<double>(room_area_);
  }

  const std::map<std::string, InstanceNote>& instances() const { return instances_; }

  // Marks visible cells explored, stamps type channels, upserts instance
  // entries. Idempotent for a repeated identical observation.
  void update(const Observation& obs, int round) {
    for (const Cell& c : obs.visible_cells) {
      if (!in_bounds(c)) continue;
      if (!explored_[idx(c)]) {
        explored_[idx(c)] = 1;
        if (region_of_[idx(c)] >= 0) ++explored_count_;
      }
      // Wall cells adjacent to seen ground are seen as obstacles.
      for (Cell d : {Cell{0, -1}, Cell{1, 0}, Cell{0, 1}, Cell{-1, 0}}) {
        Cell w{c.x + d.x, c.y + d.y};
        if (in_bounds(w) && region_of_[idx(w)] < 0) obstacle_[idx(w)] = 1;
      }
    }
    for (const auto& rec : obs.receptacles) {
      InstanceNote note;
      note.id = rec.id;
      note.type = rec.type;
      note.is_receptacle = true;
      note.room_type = rec.room_type;
      note.cell = rec.cell;
      note.region = region_at(rec.cell);
      note.round = round;
      instances_[note.id] = note;
      type_cells_[note.type].insert(idx(rec.cell));
      obstacle_[idx(rec.cell)] = 1;  // furniture occupies its cell
    }
    for (const auto& o : obs.objects) {
      InstanceNote note;
      note.id = o.id;
      note.type = o.type;
      note.is_receptacle = false;
      note.on_type = o.on_type;
      note.on_id = o.on_id;
      note.room_type = o.room_type;
      note.cell = o.cell;
      note.region = region_at(o.cell);
      note.round = round;
      instances_[note.id] = note;
      type_cells_[o.type].insert(idx(o.cell));
    }
  }

  void forget_instance(const std::string& id) { instances_.erase(id); }

  // Merge another agent's accumulated map (shared-map communication).
  void merge(const SemanticMap& other, bool include_explored) {
    if (include_explored) {
      for (std::size_t i = 0; i < explored_.size(); ++i) {
        if (other.explored_[i] && !explored_[i]) {
          explored_[i] = 1;
          if (region_of_[i] >= 0) ++explored_count_;
        }
        if (other.obstacle_[i]) obstacle_[i] = 1;
      }
    }
    for (const auto& [id, note] : other.instances_) {
      auto it = instances_.find(id);
      if (it == instances_.end() || it->second.round < note.round) instances_[id] = note;
    }
    for (const auto& [type, cells] : other.type_cells_)
      type_cells_[type].insert(cells.begin(), cells.end());
  }

  // Snapshot for trajectory-log debugging.
  nlohmann::json to_json() const {
    nlohmann::json j;
    j["explored"] = nlohmann::json::array();
    for (int y = 0; y < height_; ++y)
      for (int x = 0; x < width_; ++x)
        if (explored_[idx({x, y})] && region_of_[idx({x, y})] >= 0)
          j["explored"].push_back({x, y});
    j["instances"] = nlohmann::json::array();
    for (const auto& [id, note] : instances_)
      j["instances"].push_back({{"id", id},
                                {"type", note.type},
                                {"receptacle", note.is_receptacle},
                                {"on", note.on_id},
                                {"cell", {note.cell.x, note.cell.y}},
                                {"room", note.room_type},
                                {"round", note.round}});
    return j;
  }

  // Local G x G x (K_total + 2) occupancy tensor around the pose. Channel
  // layout: one channel per ontology type (sorted order), then obstacle,
  // then explored.
  std::vector<float> local_tensor(const Pose& pose, const Ontology& kb) const {
    const int K = kb.k_total();
    const int C = K + 2;
    std::vector<float> t(static_cast<std::size_t>(G_ * G_ * C), 0.0f);
    const int half = G_ / 2;
    for (int gy = 0; gy < G_; ++gy)
      for (int gx = 0; gx < G_; ++gx) {
        Cell c{pose.x - half + gx, pose.y - half + gy};
        if (!in_bounds(c)) continue;
        std::size_t base = static_cast<std::size_t>((gy * G_ + gx) * C);
        for (const auto& [type, cells] : type_cells_)
          if (cells.count(idx(c))) t[base + static_cast<std::size_t>(kb.type_index(type))] = 1.0f;
        if (obstacle_[idx(c)]) t[base + static_cast<std::size_t>(K)] = 1.0f;
        if (explored_[idx(c)]) t[base + static_cast<std::size_t>(K) + 1] = 1.0f;
      }
    return t;
  }

 private:
  bool in_bounds(Cell c) const { return c.x >= 0 && c.x < width_ && c.y >= 0 && c.y < height_; }
  std::size_t idx(Cell c) const { return static_cast<std::size_t>(c.y * width_ + c.x); }

  int G_ = 20;
  int width_ = 0;
  int height_ = 0;
  int n_regions_ = 0;
  int room_area_ = 0;
  int explored_count_ = 0;
  std::vector<int> region_of_;
  std::vector<std::uint8_t> explored_;
  std::vector<std::uint8_t> obstacle_;
  std::map<std::string, InstanceNote> instances_;
  std::map<std::string, std::set<std::size_t>> type_cells_;
};

// Anchor votes for a region: each distinct observed receptacle type votes for
// every room type it appears with in the triples, weight 1/#rooms-it-appears-
// with. No anchors -> LivingRoom with the low-confidence flag.
inline RoomGuess classify_region(const SemanticMap& map, int region, const Ontology& kb) {
  std::set<std::string> anchor_types;
  for (const auto& [id, note] : map.instances())
    if (note.is_receptacle && note.region == region) anchor_types.insert(note.type);

  std::map<std::string, double> votes;
  for (const auto& anchor : anchor_types) {
    std::set<std::string> rooms;
    for (const auto& tr : kb.triples())
      if (tr.receptacle_type == anchor) rooms.insert(tr.room_type);
    if (rooms.empty()) continue;
    double w = 1.0 / static_cast<double>(rooms.size());
    for (const auto& r : rooms) votes[r] += w;
  }
  if (votes.empty()) return {"LivingRoom", false};

  std::string best;
  double best_score = -1.0;
  for (const auto& room : kRoomOrder) {  // fixed order breaks ties
    auto it = votes.find(room);
    double score = it == votes.end() ? 0.0 : it->second;
    if (score > best_score + 1e-12) {
      best_score = score;
      best = room;
    }
  }
  return {best, true};
}

inline RoomGuess classify_room(const SemanticMap& map, Cell cell, const Ontology& kb) {
  if (!map.explored(cell)) throw Error("classify_room: cell not explored");
  int region = map.region_at(cell);
  if (region < 0) throw Error("classify_room: cell is a wall");
  return classify_region(map, region, kb);
}

// det = NOT is_reasonable(observed triple), then flipped with probability fp
// (0 -> 1) or fn (1 -> 0).
inline std::vector<Detection> detect_misplaced(const Observation& obs, const Ontology& kb,
                                               const DetectorNoise& noise, Rng& rng,
                                               int round = 0) {
  std::vector<Detection> out;
  for (const auto& o : obs.objects) {
    Detection d;
    d.object_id = o.id;
    d.observed = PlacementTriple{o.type, o.on_type, o.room_type};
    d.cell = o.cell;
    d.round = round;
    bool misplaced = !kb.is_reasonable(o.type, o.on_type, o.room_type);
    if (misplaced) {
      d.det = noise.fn > 0.0 && bernoulli(rng, noise.fn) ? 0 : 1;
    } else {
      d.det = noise.fp > 0.0 && bernoulli(rng, noise.fp) ? 1 : 0;
    }
    out.push_back(std::move(d));
  }
  return out;
}

struct PlacementTarget {
  std::string p_type;
  std::string r_type;
  std::string instance;  // empty = unknown, caller must explore
  bool known() const { return !instance.empty(); }
};

// First candidate pair for which the map holds an observed receptacle
// instance of that type in a region classified as that room; nearest such
// instance to the agent (ties by id). Falls back to the highest-priority
// pair with an unknown instance.
inline PlacementTarget predict_receptacle(const std::string& o_type, const SemanticMap& map,
                                          const Ontology& kb, const Pose& agent_pose) {
  auto candidates = kb.candidate_locations(o_type);
  for (const auto& [p_type, r_type] : candidates) {
    std::string best_id;
    long long best_d2 = 0;
    for (const auto& [id, note] : map.instances()) {
      if (!note.is_receptacle || note.type != p_type) continue;
      if (classify_region(map, note.region, kb).type != r_type) continue;
      long long d2v = dist2(agent_pose.cell(), note.cell);
      if (best_id.empty() || d2v < best_d2 || (d2v == best_d2 && id < best_id)) {
        best_id = id;
        best_d2 = d2v;
      }
    }
    if (!best_id.empty()) return {p_type, r_type, best_id};
  }
  return {candidates.front().first, candidates.front().second, ""};
}

}  // namespace tidysim

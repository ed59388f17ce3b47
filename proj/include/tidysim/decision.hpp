#pragma once

// Hierarchical decision: greedy distance-based sub-task allocation, sub-goal
// selection in the discretized (dx, dy, drot, ope, stop) space, a BFS
// shortest-path low-level planner, interaction viewpoints, frontier
// exploration, and intention inference for the IntenComm baseline.

#include <algorithm>
#include <deque>
#include <limits>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "tidysim/perception.hpp"
#include "tidysim/world.hpp"

namespace tidysim {

enum class Ope { PickUp, PutDown, Drop, NoAction };

inline std::string to_string(Ope o) {
  switch (o) {
    case Ope::PickUp: return "PickUp";
    case Ope::PutDown: return "PutDown";
    case Ope::Drop: return "Drop";
    case Ope::NoAction: return "NoAction";
  }
  return "?";
}

inline Ope ope_from_string(const std::string& s) {
  for (Ope o : {Ope::PickUp, Ope::PutDown, Ope::Drop, Ope::NoAction})
    if (to_string(o) == s) return o;
  throw LookupError("unknown ope '" + s + "'");
}

struct SubTask {
  enum class Kind { Explore, Place };
  Kind kind = Kind::Explore;
  // Place parameters
  std::string object_id;
  std::string o_type;
  std::string p_type;
  std::string r_type;
  std::string instance;  // target receptacle instance; empty = unknown

  static SubTask explore() { return {}; }
  bool is_place() const { return kind == Kind::Place; }
  friend bool operator==(const SubTask& a, const SubTask& b) {
    return a.kind == b.kind && a.object_id == b.object_id && a.o_type == b.o_type &&
           a.p_type == b.p_type && a.r_type == b.r_type && a.instance == b.instance;
  }
};

struct SubGoal {
  int dx = 0;   // allocentric grid cells, clipped to [-4, 4]
  int dy = 0;
  int drot = 0;  // {0, 90, 180, 270}
  Ope ope = Ope::NoAction;
  bool stop = false;

  bool valid() const {
    return dx >= -4 && dx <= 4 && dy >= -4 && dy <= 4 &&
           (drot == 0 || drot == 90 || drot == 180 || drot == 270);
  }
  friend bool operator==(const SubGoal& a, const SubGoal& b) {
    return a.dx == b.dx && a.dy == b.dy && a.drot == b.drot && a.ope == b.ope && a.stop == b.stop;
  }
};

// ---------------------------------------------------------------------------
// Grid search
// ---------------------------------------------------------------------------

// BFS distances over walkable cells; `blocked` removes cells (other agents).
// Unreachable cells get -1.
inline std::vector<int> bfs_distances(const Scene& grid, Cell from,
                                      const std::set<Cell>& blocked = {}) {
  std::vector<int> dist(static_cast<std::size_t>(grid.width * grid.height), -1);
  auto idx = [&](Cell c) { return static_cast<std::size_t>(c.y * grid.width + c.x); };
  if (!grid.walkable(from)) return dist;
  std::deque<Cell> queue{from};
  dist[idx(from)] = 0;
  while (!queue.empty()) {
    Cell c = queue.front();
    queue.pop_front();
    for (Cell d : {Cell{0, -1}, Cell{1, 0}, Cell{0, 1}, Cell{-1, 0}}) {
      Cell nxt{c.x + d.x, c.y + d.y};
      if (!grid.walkable(nxt) || blocked.count(nxt)) continue;
      if (dist[idx(nxt)] >= 0) continue;
      dist[idx(nxt)] = dist[idx(c)] + 1;
      queue.push_back(nxt);
    }
  }
  return dist;
}

inline int cell_distance(const std::vector<int>& dist, const Scene& grid, Cell c) {
  if (c.x < 0 || c.x >= grid.width || c.y < 0 || c.y >= grid.height) return -1;
  return dist[static_cast<std::size_t>(c.y * grid.width + c.x)];
}

// Articulation cells of the walkable 4-connected graph (cut vertices). An
// agent parked on one of these would permanently disconnect the floor plan,
// since stopped agents never move again.
inline std::vector<std::uint8_t> articulation_cells(const Scene& grid) {
  const int n = grid.width * grid.height;
  std::vector<std::uint8_t> cut(static_cast<std::size_t>(n), 0);
  std::vector<int> disc(static_cast<std::size_t>(n), -1), low(static_cast<std::size_t>(n), 0);
  auto idx = [&](Cell c) { return static_cast<std::size_t>(c.y * grid.width + c.x); };
  int timer = 0;

  struct Frame {
    Cell cell;
    int parent;
    int next_dir;
    int children;
  };
  static const Cell kDirs[4] = {{0, -1}, {1, 0}, {0, 1}, {-1, 0}};

  for (int y = 0; y < grid.height; ++y)
    for (int x = 0; x < grid.width; ++x) {
      Cell root{x, y};
      if (!grid.walkable(root) || disc[idx(root)] >= 0) continue;
      std::vector<Frame> stack{{root, -1, 0, 0}};
      disc[idx(root)] = low[idx(root)] = timer++;
      while (!stack.empty()) {
        Frame& f = stack.back();
        if (f.next_dir < 4) {
          Cell nxt{f.cell.x + kDirs[f.next_dir].x, f.cell.y + kDirs[f.next_dir].y};
          ++f.next_dir;
          if (!grid.walkable(nxt)) continue;
          if (static_cast<int>(idx(nxt)) == f.parent) continue;
          if (disc[idx(nxt)] >= 0) {
            low[idx(f.cell)] = std::min(low[idx(f.cell)], disc[idx(nxt)]);
            continue;
          }
          disc[idx(nxt)] = low[idx(nxt)] = timer++;
          ++f.children;
          stack.push_back(Frame{nxt, static_cast<int>(idx(f.cell)), 0, 0});
        } else {
          Frame done = f;
          stack.pop_back();
          if (!stack.empty()) {
            Frame& up = stack.back();
            low[idx(up.cell)] = std::min(low[idx(up.cell)], low[idx(done.cell)]);
            if (up.parent != -1 && low[idx(done.cell)] >= disc[idx(up.cell)])
              cut[idx(up.cell)] = 1;
          } else if (done.children > 1) {
            cut[idx(done.cell)] = 1;  // root with multiple DFS children
          }
        }
      }
    }
  return cut;
}

// Minimal action sequence from I_nav reaching pose + (dx, dy) and then the
// requested heading; equal-length plans resolve to the lexicographically
// smallest sequence under MoveAhead < MoveRight < MoveLeft < RotateRight <
// RotateLeft. The ope action, if any, is appended with `ope_target`.
inline std::vector<Action> shortest_path_actions(const Scene& grid, const Pose& pose,
                                                 const SubGoal& goal,
                                                 const std::string& ope_target = "",
                                                 const std::set<Cell>& blocked = {}) {
  if (!goal.valid()) throw Error("sub-goal outside the documented sets");
  Cell target{pose.x + goal.dx, pose.y + goal.dy};
  int target_rot = norm_rot(pose.rot + goal.drot);
  if (!grid.walkable(target)) throw PathError("sub-goal cell is not walkable");

  static const ActionType kOrder[5] = {ActionType::MoveAhead, ActionType::MoveRight,
                                       ActionType::MoveLeft, ActionType::RotateRight,
                                       ActionType::RotateLeft};
  struct Node {
    int x, y, rot;
  };
  auto state_idx = [&](int x, int y, int rot) {
    return static_cast<std::size_t>(((y * grid.width) + x) * 4 + rot / 90);
  };
  const std::size_t n_states = static_cast<std::size_t>(grid.width * grid.height * 4);
  std::vector<int> prev_state(n_states, -2);  // -2 unvisited, -1 start
  std::vector<std::int8_t> prev_action(n_states, -1);

  std::deque<Node> queue{{pose.x, pose.y, norm_rot(pose.rot)}};
  prev_state[state_idx(pose.x, pose.y, norm_rot(pose.rot))] = -1;
  std::size_t goal_state = state_idx(target.x, target.y, target_rot);

  while (!queue.empty() && prev_state[goal_state] == -2) {
    Node cur = queue.front();
    queue.pop_front();
    std::size_t ci = state_idx(cur.x, cur.y, cur.rot);
    for (int a = 0; a < 5; ++a) {
      Node nxt = cur;
      switch (kOrder[a]) {
        case ActionType::MoveAhead: {
          Cell d = heading_vec(cur.rot);
          nxt.x += d.x;
          nxt.y += d.y;
          break;
        }
        case ActionType::MoveRight: {
          Cell d = heading_vec(norm_rot(cur.rot + 90));
          nxt.x += d.x;
          nxt.y += d.y;
          break;
        }
        case ActionType::MoveLeft: {
          Cell d = heading_vec(norm_rot(cur.rot - 90));
          nxt.x += d.x;
          nxt.y += d.y;
          break;
        }
        case ActionType::RotateRight: nxt.rot = norm_rot(cur.rot + 90); break;
        case ActionType::RotateLeft: nxt.rot = norm_rot(cur.rot - 90); break;
        default: break;
      }
      Cell nc{nxt.x, nxt.y};
      if (!(nc == Cell{cur.x, cur.y}) && (!grid.walkable(nc) || blocked.count(nc))) continue;
      std::size_t ni = state_idx(nxt.x, nxt.y, nxt.rot);
      if (prev_state[ni] != -2) continue;
      prev_state[ni] = static_cast<int>(ci);
      prev_action[ni] = static_cast<std::int8_t>(a);
      queue.push_back(nxt);
    }
  }
  if (prev_state[goal_state] == -2) throw PathError("sub-goal unreachable");

  std::vector<Action> plan;
  for (std::size_t s = goal_state; prev_state[s] != -1; s = static_cast<std::size_t>(prev_state[s]))
    plan.push_back(Action::simple(kOrder[prev_action[s]]));
  std::reverse(plan.begin(), plan.end());

  switch (goal.ope) {
    case Ope::PickUp: plan.push_back(Action::pick(ope_target)); break;
    case Ope::PutDown: plan.push_back(Action::put(ope_target)); break;
    case Ope::Drop: plan.push_back(Action::simple(ActionType::Drop)); break;
    case Ope::NoAction: break;
  }
  return plan;
}

// ---------------------------------------------------------------------------
// Interaction viewpoints
// ---------------------------------------------------------------------------

struct Viewpoint {
  Cell cell;
  int rot = 0;  // heading facing the target
};

// All walkable cells within interaction range of `target` with line of sight,
// ordered by (straight-line distance to the target, x, y). The target's own
// cell is not a viewpoint (a viewpoint faces the target).
inline std::vector<Viewpoint> viewpoints_for(const Scene& grid, Cell target,
                                             const WorldConfig& cfg = {}) {
  std::vector<Viewpoint> out;
  const int r = cfg.interaction_range;
  for (int x = target.x - r; x <= target.x + r; ++x)
    for (int y = target.y - r; y <= target.y + r; ++y) {
      Cell c{x, y};
      if (c == target || !grid.walkable(c)) continue;
      if (dist2(c, target) > static_cast<long long>(r) * r) continue;
      bool occluded = false;
      for (const Cell& rc : grid_ray(c, target)) {
        if (rc == c || rc == target) continue;
        if (grid.is_wall(rc)) occluded = true;
      }
      if (occluded) continue;
      out.push_back(Viewpoint{c, facing_rot(c, target)});
    }
  std::sort(out.begin(), out.end(), [&](const Viewpoint& a, const Viewpoint& b) {
    long long da = dist2(a.cell, target), db = dist2(b.cell, target);
    if (da != db) return da < db;
    return a.cell < b.cell;
  });
  return out;
}

// Canonical interaction viewpoint of a target: nearest, ties by (x, y).
inline Viewpoint select_viewpoint(const Scene& grid, Cell target, const WorldConfig& cfg = {}) {
  auto vps = viewpoints_for(grid, target, cfg);
  if (vps.empty()) throw PathError("target has no interaction viewpoint");
  return vps.front();
}

// ---------------------------------------------------------------------------
// Frontier exploration
// ---------------------------------------------------------------------------

// Frontier: walkable, unexplored, 4-adjacent to an explored cell. Nearest by
// path distance; ties by (x, y).
inline std::optional<Cell> nearest_frontier(const Scene& grid, const SemanticMap& map, Cell from,
                                            const std::set<Cell>& blocked = {}) {
  auto dist = bfs_distances(grid, from, blocked);
  std::optional<Cell> best;
  int best_d = std::numeric_limits<int>::max();
  for (int x = 0; x < grid.width; ++x)
    for (int y = 0; y < grid.height; ++y) {
      Cell c{x, y};
      if (!grid.walkable(c) || map.explored(c)) continue;
      bool adjacent_explored = false;
      for (Cell d : {Cell{0, -1}, Cell{1, 0}, Cell{0, 1}, Cell{-1, 0}})
        if (map.explored({c.x + d.x, c.y + d.y})) adjacent_explored = true;
      if (!adjacent_explored) continue;
      int dd = cell_distance(dist, grid, c);
      if (dd < 0) continue;
      if (dd < best_d || (dd == best_d && best && c < *best)) {
        best_d = dd;
        best = c;
      }
    }
  return best;
}

// ---------------------------------------------------------------------------
// Sub-task allocation
// ---------------------------------------------------------------------------

// The slice of per-agent runtime the planner sees. `current` survives between
// rounds until completion or invalidation (handled by the caller).
struct AgentView {
  int index = 0;
  CapabilityVector cap;
  Pose pose;
  bool holding = false;
  std::string held_id;
  std::optional<SubTask> current;
  const SemanticMap* map = nullptr;
};

// Greedy nearest-pair allocation: repeatedly assign the globally closest
// (free mani agent, unhandled detected object) pair, distance = shortest
// path to the object's nearest viewpoint, ties by (agent index, object id).
// Agents keeping a Place stay assigned; everyone else explores.
inline std::vector<SubTask> plan_subtasks(const Scene& grid, const std::vector<AgentView>& team,
                                          const std::vector<Detection>& shared_dets,
                                          const Ontology& kb, const WorldConfig& cfg = {}) {
  const std::size_t n = team.size();
  std::vector<SubTask> result(n, SubTask::explore());
  std::set<std::string> handled;
  std::vector<bool> busy(n, false);

  for (std::size_t i = 0; i < n; ++i) {
    if (team[i].current && team[i].current->is_place()) {
      result[i] = *team[i].current;
      handled.insert(team[i].current->object_id);
      busy[i] = true;
    }
  }

  // Candidate objects: deduplicated positive detections not already handled.
  std::vector<Detection> candidates;
  {
    std::set<std::string> seen;
    for (const auto& d : shared_dets) {
      if (d.det != 1 || handled.count(d.object_id) || seen.count(d.object_id)) continue;
      seen.insert(d.object_id);
      candidates.push_back(d);
    }
    std::sort(candidates.begin(), candidates.end(),
              [](const Detection& a, const Detection& b) { return a.object_id < b.object_id; });
  }

  // Path distance from each free mani agent to each candidate's viewpoint.
  std::vector<std::vector<int>> agent_dist(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (busy[i] || team[i].cap.mani != 1) continue;
    auto dist = bfs_distances(grid, team[i].pose.cell());
    agent_dist[i].assign(candidates.size(), -1);
    for (std::size_t c = 0; c < candidates.size(); ++c) {
      int best = -1;
      for (const auto& vp : viewpoints_for(grid, candidates[c].cell, cfg)) {
        int dd = cell_distance(dist, grid, vp.cell);
        if (dd >= 0 && (best < 0 || dd < best)) best = dd;
      }
      if (team[i].pose.cell() == candidates[c].cell) best = 0;  // standing on it
      agent_dist[i][c] = best;
    }
  }

  std::vector<bool> taken(candidates.size(), false);
  for (;;) {
    int best_agent = -1, best_obj = -1, best_d = std::numeric_limits<int>::max();
    for (std::size_t i = 0; i < n; ++i) {
      if (busy[i] || team[i].cap.mani != 1) continue;
      for (std::size_t c = 0; c < candidates.size(); ++c) {
        if (taken[c] || agent_dist[i][c] < 0) continue;
        if (agent_dist[i][c] < best_d) {
          best_d = agent_dist[i][c];
          best_agent = static_cast<int>(i);
          best_obj = static_cast<int>(c);
        }
        // ties resolve to the lower (agent index, object id) via scan order
      }
    }
    if (best_agent < 0) break;
    const Detection& det = candidates[static_cast<std::size_t>(best_obj)];
    const AgentView& agent = team[static_cast<std::size_t>(best_agent)];
    PlacementTarget target =
        predict_receptacle(det.observed.object_type, *agent.map, kb, agent.pose);
    SubTask st;
    st.kind = SubTask::Kind::Place;
    st.object_id = det.object_id;
    st.o_type = det.observed.object_type;
    st.p_type = target.p_type;
    st.r_type = target.r_type;
    st.instance = target.instance;
    result[static_cast<std::size_t>(best_agent)] = st;
    busy[static_cast<std::size_t>(best_agent)] = true;
    taken[static_cast<std::size_t>(best_obj)] = true;
  }
  return result;
}

// ---------------------------------------------------------------------------
// Sub-goal selection
// ---------------------------------------------------------------------------

struct SubGoalResult {
  SubGoal goal;
  std::string ope_target;       // id for PickUp/PutDown
  std::optional<Cell> nav_target;  // where the agent is ultimately headed
  int face_rot = -1;            // absolute heading the sub-goal faces, -1 none
  bool replan = false;          // caller should re-run plan_subtasks
};

namespace detail {

// Sub-goal toward `target`: the furthest cell of the shortest path whose
// displacement fits the +/-4 box; heading faces the first step direction.
inline SubGoalResult nav_subgoal(const Scene& grid, const Pose& pose, Cell target,
                                 const std::set<Cell>& blocked) {
  SubGoalResult out;
  out.nav_target = target;
  auto dist = bfs_distances(grid, target, blocked);  // distances from target
  int here = cell_distance(dist, grid, pose.cell());
  if (here < 0) {
    // Blocked by transient agent cells; retry ignoring them before failing.
    dist = bfs_distances(grid, target);
    here = cell_distance(dist, grid, pose.cell());
    if (here < 0) {
      out.replan = true;
      return out;
    }
  }
  if (here == 0) return out;  // already there
  // Walk downhill from the agent toward the target.
  Cell cur = pose.cell();
  Cell box_end = cur;
  Cell first_step = cur;
  int remaining = here;
  while (remaining > 0) {
    Cell next = cur;
    bool found = false;
    for (Cell d : {Cell{0, -1}, Cell{1, 0}, Cell{0, 1}, Cell{-1, 0}}) {
      Cell cand{cur.x + d.x, cur.y + d.y};
      if (cell_distance(dist, grid, cand) == remaining - 1 && grid.walkable(cand)) {
        next = cand;
        found = true;
        break;
      }
    }
    if (!found) break;
    if (first_step == pose.cell()) first_step = next;
    int ddx = next.x - pose.x, ddy = next.y - pose.y;
    if (ddx < -4 || ddx > 4 || ddy < -4 || ddy > 4) break;
    box_end = next;
    cur = next;
    --remaining;
  }
  out.goal.dx = box_end.x - pose.x;
  out.goal.dy = box_end.y - pose.y;
  if (!(first_step == pose.cell())) {
    out.face_rot = facing_rot(pose.cell(), first_step);
    out.goal.drot = norm_rot(out.face_rot - pose.rot);
  }
  return out;
}

inline bool clear_ray(const Scene& grid, Cell a, Cell b) {
  for (const Cell& c : grid_ray(a, b)) {
    if (c == a || c == b) continue;
    if (grid.is_wall(c)) return false;
  }
  return true;
}

}  // namespace detail

// Next sub-goal for one agent under its current sub-task.
//  - Explore: head toward the nearest frontier, stop when none remains.
//  - Place, not holding: head to the object's viewpoint; in range -> PickUp.
//  - Place, holding: head to the target receptacle's viewpoint; in range ->
//    PutDown. Unknown target instance degrades to exploration; no frontier
//    left -> replan signal.
inline SubGoalResult next_subgoal(const Scene& grid, const AgentView& me, const SubTask& task,
                                  const Ontology& kb, const WorldConfig& cfg = {},
                                  const std::set<Cell>& blocked = {}) {
  (void)kb;  // Place parameters are produced by perception at planning time
  const SemanticMap& map = *me.map;
  const long long r2 =
      static_cast<long long>(cfg.interaction_range) * cfg.interaction_range;

  auto explore = [&]() {
    SubGoalResult out;
    auto frontier = nearest_frontier(grid, map, me.pose.cell(), blocked);
    if (!frontier) {
      out.goal.stop = true;
      return out;
    }
    return detail::nav_subgoal(grid, me.pose, *frontier, blocked);
  };

  if (!task.is_place()) return explore();

  auto interact_goal = [&](Cell target, Ope ope, const std::string& id) {
    SubGoalResult out;
    if (!(target == me.pose.cell())) {
      out.face_rot = facing_rot(me.pose.cell(), target);
      out.goal.drot = norm_rot(out.face_rot - me.pose.rot);
    }
    out.goal.ope = ope;
    out.ope_target = id;
    return out;
  };

  if (!me.holding) {
    auto it = map.instances().find(task.object_id);
    if (it == map.instances().end()) {
      SubGoalResult out;
      out.replan = true;  // lost track of the object
      return out;
    }
    Cell obj_cell = it->second.cell;
    if (dist2(me.pose.cell(), obj_cell) <= r2 && detail::clear_ray(grid, me.pose.cell(), obj_cell))
      return interact_goal(obj_cell, Ope::PickUp, task.object_id);
    auto vps = viewpoints_for(grid, obj_cell, cfg);
    auto dist = bfs_distances(grid, me.pose.cell(), blocked);
    for (const auto& vp : vps) {
      if (cell_distance(dist, grid, vp.cell) >= 0)
        return detail::nav_subgoal(grid, me.pose, vp.cell, blocked);
    }
    // Other agents may transiently seal a doorway; only give up if the
    // target stays unreachable on the empty grid.
    auto free_dist = bfs_distances(grid, me.pose.cell());
    for (const auto& vp : vps) {
      if (cell_distance(free_dist, grid, vp.cell) >= 0)
        return detail::nav_subgoal(grid, me.pose, vp.cell, blocked);
    }
    SubGoalResult out;
    out.replan = true;  // unreachable target
    return out;
  }

  // Holding: place on the target instance, or search for one.
  if (task.instance.empty()) {
    SubGoalResult out = explore();
    if (out.goal.stop) out.replan = true;  // nowhere left to search for a target
    return out;
  }
  auto it = map.instances().find(task.instance);
  if (it == map.instances().end()) {
    SubGoalResult out;
    out.replan = true;
    return out;
  }
  Cell rec_cell = it->second.cell;
  // In range of an interaction cell and facing with clear sight -> PutDown.
  bool in_range = false;
  for (Cell d : {Cell{0, -1}, Cell{1, 0}, Cell{0, 1}, Cell{-1, 0}}) {
    Cell ic{rec_cell.x + d.x, rec_cell.y + d.y};
    if (grid.walkable(ic) && dist2(me.pose.cell(), ic) <= r2) in_range = true;
  }
  if (in_range && dist2(me.pose.cell(), rec_cell) <= r2 &&
      detail::clear_ray(grid, me.pose.cell(), rec_cell))
    return interact_goal(rec_cell, Ope::PutDown, task.instance);
  auto vps = viewpoints_for(grid, rec_cell, cfg);
  auto dist = bfs_distances(grid, me.pose.cell(), blocked);
  for (const auto& vp : vps) {
    if (cell_distance(dist, grid, vp.cell) >= 0)
      return detail::nav_subgoal(grid, me.pose, vp.cell, blocked);
  }
  auto free_dist = bfs_distances(grid, me.pose.cell());
  for (const auto& vp : vps) {
    if (cell_distance(free_dist, grid, vp.cell) >= 0)
      return detail::nav_subgoal(grid, me.pose, vp.cell, blocked);
  }
  SubGoalResult out;
  out.replan = true;
  return out;
}

// IntenComm: run the same deterministic sub-goal rule on each peer's
// broadcast state under the inferring agent's own map.
struct PeerState {
  CapabilityVector cap;
  Pose pose;
  bool holding = false;
  SubTask subtask;
};

inline std::vector<SubGoal> infer_intentions(const Scene& grid, const std::vector<PeerState>& peers,
                                             const SemanticMap& my_map, const Ontology& kb,
                                             const WorldConfig& cfg = {}) {
  std::vector<SubGoal> out;
  for (const auto& peer : peers) {
    AgentView view;
    view.cap = peer.cap;
    view.pose = peer.pose;
    view.holding = peer.holding;
    view.map = &my_map;
    out.push_back(next_subgoal(grid, view, peer.subtask, kb, cfg).goal);
  }
  return out;
}

}  // namespace tidysim

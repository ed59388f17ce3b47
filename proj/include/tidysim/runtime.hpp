#pragma once

// Lock-step episode engine shared by the expert-demonstration generator and
// the evaluation harness.
//
// One round = one sub-goal step = one communication exchange = at most one
// low-level action per agent, executed in agent-index order. Len (the #PL
// step count) is therefore the number of rounds, which is what makes the
// fixed-payload protocols' per-agent-step dimension counts exact.

#include <algorithm>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "tidysim/comm.hpp"
#include "tidysim/decision.hpp"
#include "tidysim/perception.hpp"
#include "tidysim/world.hpp"

namespace tidysim {

enum class PolicyKind { Heuristic, Learned, Random, Flat };

inline std::string to_string(PolicyKind p) {
  switch (p) {
    case PolicyKind::Heuristic: return "heuristic";
    case PolicyKind::Learned: return "learned";
    case PolicyKind::Random: return "random";
    case PolicyKind::Flat: return "flat";
  }
  return "?";
}

inline PolicyKind policy_from_string(const std::string& s) {
  for (PolicyKind p : {PolicyKind::Heuristic, PolicyKind::Learned, PolicyKind::Random,
                       PolicyKind::Flat})
    if (to_string(p) == s) return p;
  throw LookupError("unknown policy '" + s + "'");
}

struct RuntimeConfig {
  WorldConfig world;
  CommConfig comm;
  Protocol protocol = Protocol::HanGrCom;
  PolicyKind policy = PolicyKind::Heuristic;
  DetectorNoise noise;
  int max_steps = 300;
  std::uint64_t seed = 0;

  // Oracle knowledge injection (expert demonstrations, SA(Oracle)).
  bool oracle_detections = false;  // all misplacement triples + locations known
  bool oracle_full_map = false;    // every instance preloaded into the maps

  // Ablation switches.
  bool ablate_knowledge = false;  // detector answers by coin flip
  bool ablate_detector = false;   // no detections produced at all
  bool ablate_predictor = false;  // Place target = random observed receptacle

  // Learned-policy hook: (agent slot, sf ++ subtask embedding) -> SubGoal.
  // Per-agent because the trained heads do not share weights.
  std::function<SubGoal(int, const Vec&)> learned_subgoal;
};

// Sub-task embedding handed to the sub-goal heads alongside sf. This is the
// stateless stand-in for the paper-style learned sub-task/navigation context:
// discrete task parameters, the local navigation recommendation, and heading
// features with a rotation x direction cross so that relative-rotation
// decisions are linearly representable.
//
// Layout:
//   [0]      kind (0 Explore, 1 Place)
//   [1..3]   object / receptacle / room type indices (-1 when absent)
//   [4..5]   local waypoint offset dx, dy (box-walked, in [-4, 4])
//   [6..8]   target-known, holding, within-interaction-range flags
//   [9..12]  faced direction one-hot (N, E, S, W; zero when none)
//   [13..16] agent rotation one-hot
//   [17..32] rotation x direction interaction one-hot
inline constexpr int kSubtaskEmbDims = 33;

inline Vec subtask_embedding(const SubTask& task, const Ontology& kb, const AgentView& me,
                             const SubGoalResult& sgr, const WorldConfig& wcfg) {
  Vec e(kSubtaskEmbDims, 0.0);
  e[0] = task.is_place() ? 1.0 : 0.0;
  e[1] = task.is_place() && kb.has_type(task.o_type) && kb.type(task.o_type).pickupable
             ? kb.pickupable_index(task.o_type)
             : -1.0;
  e[2] = task.is_place() && kb.has_type(task.p_type) && kb.type(task.p_type).receptacle
             ? kb.receptacle_index(task.p_type)
             : -1.0;
  e[3] = task.is_place() ? Ontology::room_index(task.r_type) : -1.0;
  e[4] = sgr.goal.stop ? 0.0 : sgr.goal.dx;
  e[5] = sgr.goal.stop ? 0.0 : sgr.goal.dy;
  e[6] = task.is_place() && !task.instance.empty() ? 1.0 : 0.0;
  e[7] = me.holding ? 1.0 : 0.0;
  if (task.is_place()) {
    Cell target{-1, -1};
    bool have = false;
    const auto& inst = me.map->instances();
    if (me.holding) {
      auto it = inst.find(task.instance);
      if (it != inst.end()) {
        target = it->second.cell;
        have = true;
      }
    } else {
      auto it = inst.find(task.object_id);
      if (it != inst.end()) {
        target = it->second.cell;
        have = true;
      }
    }
    long long r2 = static_cast<long long>(wcfg.interaction_range) * wcfg.interaction_range;
    if (have && dist2(me.pose.cell(), target) <= r2) e[8] = 1.0;
  }
  int rot_idx = norm_rot(me.pose.rot) / 90;
  e[13 + rot_idx] = 1.0;
  if (sgr.face_rot >= 0) {
    int dir_idx = norm_rot(sgr.face_rot) / 90;
    e[9 + dir_idx] = 1.0;
    e[17 + rot_idx * 4 + dir_idx] = 1.0;
  }
  return e;
}

struct AgentRoundRecord {
  StateFeature sf;
  Vec emb;  // sub-task embedding
  SubTask subtask;
  SubGoal subgoal;
  std::vector<Action> actions;       // 0 or 1 (hold rounds record none)
  std::vector<StepStatus> results;
};

struct RoundRecord {
  int round = 0;
  std::vector<AgentRoundRecord> agents;
};

struct ObjectOutcome {
  bool picked = false;       // detected and picked up at least once
  bool tidy_at_end = false;  // passes D in the final scene
};

struct EpisodeOutcome {
  int rounds = 0;  // Len: max low-level steps over agents (lock-step)
  bool complete = false;
  bool all_stopped = false;
  Scene final_scene;
  CommLedger ledger;
  std::vector<RoundRecord> log;
  std::map<std::string, ObjectOutcome> misplaced;  // one entry per initial misplacement
  int n_agents = 0;
};

namespace detail {

struct AgentRuntime {
  SemanticMap map;
  std::map<std::string, Detection> pool;      // positive detections by object id
  std::map<std::string, int> resolved_round;  // objects known re-placed/cleared
  std::optional<SubTask> current;
  std::optional<Detection> newest;
  int staleness = 0;
  bool new_detection = false;
  StateFeature sf;
  std::vector<int> state_peers;  // senders whose state arrived this round
};

}  // namespace detail

class EpisodeEngine {
 public:
  // The scene must already have the task applied and the roster placed.
  EpisodeEngine(Scene scene, const Ontology& kb, const RuntimeConfig& cfg)
      : scene_(std::move(scene)), kb_(kb), cfg_(cfg), rng_(cfg.seed),
        gens_(make_generators(cfg.comm)) {
    const std::size_t n = scene_.agents.size();
    if (n == 0) throw Error("episode: no agents in scene");
    for (std::size_t i = 0; i < n; ++i) {
      detail::AgentRuntime rt;
      rt.map = SemanticMap(scene_);
      agents_.push_back(std::move(rt));
    }
    articulation_ = articulation_cells(scene_);

    for (const auto& obj : scene_.objects)
      if (!discriminate(scene_, obj.id, kb_)) misplaced_.insert(obj.id);

    if (cfg_.oracle_detections) preload_oracle();
    if (cfg_.oracle_full_map) preload_full_map();
  }

  EpisodeOutcome run() {
    EpisodeOutcome out;
    out.n_agents = static_cast<int>(scene_.agents.size());
    for (const auto& id : misplaced_) out.misplaced[id] = ObjectOutcome{};

    int round = 0;
    while (round < cfg_.max_steps) {
      bool any_active = false;
      for (const auto& a : scene_.agents) any_active = any_active || !a.stopped;
      if (!any_active) {
        out.all_stopped = true;
        break;
      }
      ++round;
      RoundRecord rec;
      rec.round = round;
      rec.agents.resize(scene_.agents.size());

      if (cfg_.policy == PolicyKind::Random) {
        random_round(round, rec);
      } else {
        policy_round(round, rec);
      }
      out.log.push_back(std::move(rec));

      if (is_task_complete(scene_, kb_)) {
        out.complete = true;
        break;
      }
    }
    out.rounds = round;
    bool all_stopped = true;
    for (const auto& a : scene_.agents) all_stopped = all_stopped && a.stopped;
    out.all_stopped = out.all_stopped || all_stopped;
    for (auto& [id, flags] : out.misplaced) {
      flags.picked = picked_.count(id) > 0;
      flags.tidy_at_end = discriminate(scene_, id, kb_);
    }
    out.final_scene = scene_;
    out.ledger = std::move(ledger_);
    return out;
  }

  const Scene& scene() const { return scene_; }

 private:
  void preload_oracle() {
    for (const auto& id : misplaced_) {
      const ObjectInstance& obj = scene_.object(id);
      Detection d;
      d.object_id = id;
      d.det = 1;
      d.observed = scene_.placement_triple(obj);
      d.cell = scene_.object_cell(obj);
      d.round = 0;
      Observation fake;
      fake.objects.push_back(SeenObject{obj.id, obj.type, d.observed.receptacle_type,
                                        obj.placement.kind == PlaceKind::OnReceptacle
                                            ? obj.placement.receptacle_id
                                            : std::string(),
                                        d.observed.room_type, d.cell});
      for (auto& a : agents_) {
        a.map.update(fake, 0);
        a.pool[id] = d;
      }
    }
  }

  void preload_full_map() {
    Observation fake;
    for (const auto& rec : scene_.receptacles)
      fake.receptacles.push_back(SeenReceptacle{
          rec.id, rec.type, scene_.rooms[static_cast<std::size_t>(rec.room)].type, rec.cell});
    for (const auto& obj : scene_.objects) {
      if (obj.placement.kind == PlaceKind::Held) continue;
      PlacementTriple tr = scene_.placement_triple(obj);
      fake.objects.push_back(SeenObject{obj.id, obj.type, tr.receptacle_type,
                                        obj.placement.kind == PlaceKind::OnReceptacle
                                            ? obj.placement.receptacle_id
                                            : std::string(),
                                        tr.room_type, scene_.object_cell(obj)});
    }
    for (auto& a : agents_) a.map.update(fake, 0);
  }

  // Remove stale knowledge: floor objects gone from a visible cell, and
  // receptacle placements contradicted by a fresh view of that receptacle.
  void reconcile(detail::AgentRuntime& rt, const Observation& obs, int round) {
    std::set<Cell> visible(obs.visible_cells.begin(), obs.visible_cells.end());
    std::set<std::string> seen_objects, seen_receptacles;
    for (const auto& o : obs.objects) seen_objects.insert(o.id);
    for (const auto& r : obs.receptacles) seen_receptacles.insert(r.id);

    std::vector<std::string> stale;
    for (const auto& [id, note] : rt.map.instances()) {
      if (note.is_receptacle || seen_objects.count(id)) continue;
      bool expect_visible = note.on_type == kFloor ? visible.count(note.cell) > 0
                                                   : seen_receptacles.count(note.on_id) > 0;
      if (expect_visible) stale.push_back(id);
    }
    for (const auto& id : stale) {
      rt.map.forget_instance(id);
      rt.pool.erase(id);
      rt.resolved_round[id] = round;
    }
  }

  void perceive(int agent_idx, int round) {
    detail::AgentRuntime& rt = agents_[static_cast<std::size_t>(agent_idx)];
    Observation obs = observe(scene_, agent_idx, kb_, cfg_.world);
    rt.map.update(obs, round);
    reconcile(rt, obs, round);
    rt.new_detection = false;
    if (cfg_.ablate_detector) {
      ++rt.staleness;
      return;
    }
    std::vector<Detection> dets;
    if (cfg_.ablate_knowledge) {
      for (const auto& o : obs.objects) {
        Detection d;
        d.object_id = o.id;
        d.det = bernoulli(rng_, 0.5) ? 1 : 0;  // knowledge removed: coin flip
        d.observed = PlacementTriple{o.type, o.on_type, o.room_type};
        d.cell = o.cell;
        d.round = round;
        dets.push_back(d);
      }
    } else {
      dets = detect_misplaced(obs, kb_, cfg_.noise, rng_, round);
    }
    for (const auto& d : dets) {
      if (!kb_.type(d.observed.object_type).pickupable) continue;
      if (d.det == 1) {
        auto res = rt.resolved_round.find(d.object_id);
        if (res != rt.resolved_round.end() && res->second >= d.round) continue;
        bool fresh = rt.pool.find(d.object_id) == rt.pool.end();
        rt.pool[d.object_id] = d;
        if (fresh) {
          rt.new_detection = true;
          rt.newest = d;
          rt.staleness = 0;
        }
      } else if (rt.pool.count(d.object_id)) {
        rt.pool.erase(d.object_id);
        rt.resolved_round[d.object_id] = round;
      }
    }
    if (!rt.new_detection) ++rt.staleness;
  }

  void featurize(int agent_idx) {
    detail::AgentRuntime& rt = agents_[static_cast<std::size_t>(agent_idx)];
    const AgentState& a = scene_.agents[static_cast<std::size_t>(agent_idx)];
    FeatureInputs in;
    in.cap = a.cap;
    in.pose = a.pose;
    in.new_detection = rt.new_detection;
    if (rt.newest) {
      in.newest_type_index = kb_.pickupable_index(rt.newest->observed.object_type);
      in.newest_det = rt.newest->det;
    }
    in.staleness = rt.staleness;
    if (rt.current && rt.current->is_place()) {
      if (!rt.current->p_type.empty())
        in.target_recep_index = kb_.receptacle_index(rt.current->p_type);
      if (!rt.current->r_type.empty())
        in.target_room_index = Ontology::room_index(rt.current->r_type);
      in.target_known = !rt.current->instance.empty();
    }
    auto frontier = nearest_frontier(scene_, rt.map, a.pose.cell());
    if (frontier) {
      auto dist = bfs_distances(scene_, a.pose.cell());
      in.frontier_distance = cell_distance(dist, scene_, *frontier);
    }
    in.unexplored_fraction = rt.map.unexplored_fraction();
    rt.sf = featurize_state(in, cfg_.comm.d_sf);
  }

  void communicate(int round) {
    const std::size_t n = agents_.size();
    std::vector<ProtocolInput> inputs(n);
    for (std::size_t i = 0; i < n; ++i) {
      inputs[i].sf = agents_[i].sf;
      inputs[i].new_detection = agents_[i].new_detection;
      if (cfg_.protocol == Protocol::HanGrCom)
        inputs[i].vecs = make_vectors(agents_[i].sf, gens_);
    }
    ProtocolResult res = run_protocol(cfg_.protocol, inputs, cfg_.comm, ledger_, round);
    central_ = false;
    for (std::size_t i = 0; i < n; ++i) {
      const Inbox& inbox = res.inboxes[i];
      central_ = central_ || inbox.central;
      agents_[i].state_peers = inbox.state_from;
      for (int j : inbox.map_from) {
        agents_[i].map.merge(agents_[static_cast<std::size_t>(j)].map, true);
        merge_pool(agents_[i], agents_[static_cast<std::size_t>(j)]);
      }
      for (int j : inbox.cmpr_map_from) {
        agents_[i].map.merge(agents_[static_cast<std::size_t>(j)].map, false);
        merge_pool(agents_[i], agents_[static_cast<std::size_t>(j)]);
      }
    }
    // IntenComm receivers model peers' next moves from the shared state.
    if (cfg_.protocol == Protocol::IntenComm) {
      for (std::size_t i = 0; i < n; ++i) {
        std::vector<PeerState> peers;
        for (int j : agents_[i].state_peers) {
          const auto& pj = scene_.agents[static_cast<std::size_t>(j)];
          PeerState ps;
          ps.cap = pj.cap;
          ps.pose = pj.pose;
          ps.holding = !pj.held.empty();
          if (agents_[static_cast<std::size_t>(j)].current)
            ps.subtask = *agents_[static_cast<std::size_t>(j)].current;
          peers.push_back(ps);
        }
        infer_intentions(scene_, peers, agents_[i].map, kb_, cfg_.world);
      }
    }
  }

  void merge_pool(detail::AgentRuntime& dst, const detail::AgentRuntime& src) {
    for (const auto& [id, det] : src.pool) {
      auto res = dst.resolved_round.find(id);
      if (res != dst.resolved_round.end() && res->second >= det.round) continue;
      if (!dst.pool.count(id)) dst.pool[id] = det;
    }
    for (const auto& [id, r] : src.resolved_round) {
      auto mine = dst.resolved_round.find(id);
      if (mine == dst.resolved_round.end() || mine->second < r) {
        auto det = dst.pool.find(id);
        if (det != dst.pool.end() && det->second.round <= r) {
          dst.pool.erase(det);
          dst.resolved_round[id] = r;
        }
      }
    }
  }

  AgentView view_of(int i) const {
    const AgentState& a = scene_.agents[static_cast<std::size_t>(i)];
    AgentView v;
    v.index = i;
    v.cap = a.cap;
    v.pose = a.pose;
    v.holding = !a.held.empty();
    v.held_id = a.held;
    v.current = agents_[static_cast<std::size_t>(i)].current;
    v.map = &agents_[static_cast<std::size_t>(i)].map;
    return v;
  }

  // The Place sub-task stays valid until completion or invalidation.
  void invalidate_current(int i) {
    detail::AgentRuntime& rt = agents_[static_cast<std::size_t>(i)];
    if (!rt.current || !rt.current->is_place()) return;
    const AgentState& a = scene_.agents[static_cast<std::size_t>(i)];
    const std::string& obj = rt.current->object_id;
    if (a.held == obj) return;  // carrying it: still mine
    if (!rt.pool.count(obj)) {  // resolved, re-placed, or vanished
      rt.current.reset();
      return;
    }
    if (!a.held.empty() && a.held != obj) rt.current.reset();
  }

  void plan(int round) {
    const std::size_t n = agents_.size();
    for (std::size_t i = 0; i < n; ++i) invalidate_current(static_cast<int>(i));

    std::vector<SubTask> assigned(n);
    if (central_) {
      // Virtual center: one global plan over everyone.
      std::vector<AgentView> team;
      std::vector<Detection> dets;
      for (std::size_t i = 0; i < n; ++i) {
        team.push_back(view_of(static_cast<int>(i)));
        for (const auto& [id, d] : agents_[i].pool) dets.push_back(d);
      }
      assigned = plan_subtasks(scene_, team, dets, kb_, cfg_.world);
    } else {
      for (std::size_t i = 0; i < n; ++i) {
        if (scene_.agents[i].stopped) continue;
        // Plan over self plus every peer whose state arrived this round.
        std::vector<AgentView> team{view_of(static_cast<int>(i))};
        std::set<int> added{static_cast<int>(i)};
        for (int j : agents_[i].state_peers) {
          if (added.count(j)) continue;
          added.insert(j);
          AgentView pv = view_of(j);
          pv.map = &agents_[i].map;  // peers are modeled under my knowledge
          team.push_back(pv);
        }
        std::vector<Detection> dets;
        for (const auto& [id, d] : agents_[i].pool) dets.push_back(d);
        auto tasks = plan_subtasks(scene_, team, dets, kb_, cfg_.world);
        assigned[i] = tasks[0];  // self is slot 0
      }
    }
    for (std::size_t i = 0; i < n; ++i) {
      if (scene_.agents[i].stopped) continue;
      agents_[i].current = assigned[i];
      // A holder always works toward placing what it carries, even if its
      // Place was dropped by a transient replan (the pool no longer lists a
      // held object, so plan_subtasks cannot re-assign it).
      const std::string& held = scene_.agents[i].held;
      if (!held.empty() &&
          !(agents_[i].current->is_place() && agents_[i].current->object_id == held)) {
        SubTask st;
        st.kind = SubTask::Kind::Place;
        st.object_id = held;
        st.o_type = scene_.object(held).type;
        agents_[i].current = st;
      }
      refresh_place_params(static_cast<int>(i), round);
    }
  }

  // Re-evaluate the receptacle prediction while a target is unknown; ablated
  // predictor draws a random observed receptacle instead.
  void refresh_place_params(int i, int round) {
    (void)round;
    detail::AgentRuntime& rt = agents_[static_cast<std::size_t>(i)];
    if (!rt.current || !rt.current->is_place()) return;
    SubTask& task = *rt.current;
    if (cfg_.ablate_predictor) {
      if (!task.instance.empty()) return;
      std::vector<std::string> recs;
      for (const auto& [id, note] : rt.map.instances())
        if (note.is_receptacle) recs.push_back(id);
      if (recs.empty()) return;
      const std::string& pick = recs[uniform_index(rng_, recs.size())];
      const InstanceNote& note = rt.map.instances().at(pick);
      task.instance = pick;
      task.p_type = note.type;
      task.r_type = classify_region(rt.map, note.region, kb_).type;
      return;
    }
    if (task.instance.empty()) {
      PlacementTarget t = predict_receptacle(task.o_type, rt.map, kb_,
                                             scene_.agents[static_cast<std::size_t>(i)].pose);
      task.p_type = t.p_type;
      task.r_type = t.r_type;
      task.instance = t.instance;
    }
  }

  void policy_round(int round, RoundRecord& rec) {
    const std::size_t n = agents_.size();
    for (std::size_t i = 0; i < n; ++i)
      if (!scene_.agents[i].stopped) perceive(static_cast<int>(i), round);
    for (std::size_t i = 0; i < n; ++i)
      if (!scene_.agents[i].stopped) featurize(static_cast<int>(i));
    communicate(round);
    plan(round);

    // Decide and execute one low-level action per agent, in index order.
    for (std::size_t i = 0; i < n; ++i) {
      AgentState& a = scene_.agents[i];
      AgentRoundRecord& ar = rec.agents[i];
      if (a.stopped) continue;
      detail::AgentRuntime& rt = agents_[i];
      ar.sf = rt.sf;
      SubTask task = rt.current.value_or(SubTask::explore());
      ar.subtask = task;

      std::set<Cell> blocked;
      for (std::size_t j = 0; j < n; ++j)
        if (j != i) blocked.insert(scene_.agents[j].pose.cell());

      AgentView me = view_of(static_cast<int>(i));
      SubGoalResult sgr = next_subgoal(scene_, me, task, kb_, cfg_.world, blocked);
      if (sgr.replan) {
        rt.current.reset();
        task = SubTask::explore();
        sgr = next_subgoal(scene_, me, task, kb_, cfg_.world, blocked);
        ar.subtask = task;
      }
      ar.emb = subtask_embedding(task, kb_, me, sgr, cfg_.world);

      SubGoal goal = sgr.goal;
      std::string ope_target = sgr.ope_target;
      if (cfg_.policy == PolicyKind::Learned || cfg_.policy == PolicyKind::Flat) {
        if (!cfg_.learned_subgoal) throw Error("learned policy requires a model");
        Vec feat = rt.sf.v;
        Vec emb = cfg_.policy == PolicyKind::Flat ? Vec(kSubtaskEmbDims, 0.0) : ar.emb;
        feat.insert(feat.end(), emb.begin(), emb.end());
        goal = cfg_.learned_subgoal(static_cast<int>(i), feat);
        ope_target = resolve_ope_target(task, goal);
        if ((goal.ope == Ope::PickUp || goal.ope == Ope::PutDown) && ope_target.empty())
          goal.ope = Ope::NoAction;  // head proposed an operation with no target
      }
      ar.subgoal = goal;

      if (goal.stop) {
        // Hold position instead of stopping while carrying an object or
        // while this agent could still service a pending detection; Stop is
        // irrevocable.
        if (!a.held.empty()) continue;
        if (a.cap.mani == 1 && !rt.pool.empty()) continue;
        // Never park on a cut vertex: a stopped agent there would seal off
        // part of the floor plan for everyone else.
        if (articulation_[static_cast<std::size_t>(a.pose.y * scene_.width + a.pose.x)]) {
          if (auto act = step_off_chokepoint(static_cast<int>(i), blocked)) {
            StepResult r = step(scene_, static_cast<int>(i), *act, kb_, cfg_.world);
            ar.actions.push_back(*act);
            ar.results.push_back(r.status);
            continue;
          }
        }
        Action act = Action::simple(ActionType::Stop);
        StepResult r = step(scene_, static_cast<int>(i), act, kb_, cfg_.world);
        ar.actions.push_back(act);
        ar.results.push_back(r.status);
        continue;
      }

      std::vector<Action> plan_actions;
      try {
        plan_actions = shortest_path_actions(scene_, a.pose, goal, ope_target, blocked);
      } catch (const PathError&) {
        try {  // transient agent blockage: fall back to pathing through
          plan_actions = shortest_path_actions(scene_, a.pose, goal, ope_target);
        } catch (const PathError&) {
          rt.current.reset();  // truly unreachable now; replan next round
          continue;
        }
      } catch (const Error&) {
        continue;  // learned head proposed an out-of-grid goal: hold
      }
      if (plan_actions.empty()) continue;

      Action act = plan_actions.front();
      StepResult r = step(scene_, static_cast<int>(i), act, kb_, cfg_.world);
      ar.actions.push_back(act);
      ar.results.push_back(r.status);
      after_action(static_cast<int>(i), act, r, round);
    }
  }

  // One step toward the nearest non-articulation cell before stopping.
  std::optional<Action> step_off_chokepoint(int i, const std::set<Cell>& blocked) {
    const Pose& pose = scene_.agents[static_cast<std::size_t>(i)].pose;
    auto dist = bfs_distances(scene_, pose.cell(), blocked);
    std::optional<Cell> target;
    int best = std::numeric_limits<int>::max();
    for (int y = 0; y < scene_.height; ++y)
      for (int x = 0; x < scene_.width; ++x) {
        Cell c{x, y};
        if (articulation_[static_cast<std::size_t>(y * scene_.width + x)]) continue;
        if (!scene_.walkable(c) || blocked.count(c)) continue;
        int d = cell_distance(dist, scene_, c);
        if (d < 0) continue;
        if (d < best || (d == best && target && c < *target)) {
          best = d;
          target = c;
        }
      }
    if (!target) return std::nullopt;
    SubGoalResult nav = detail::nav_subgoal(scene_, pose, *target, blocked);
    if (nav.replan) return std::nullopt;
    try {
      auto plan = shortest_path_actions(scene_, pose, nav.goal, "", blocked);
      if (!plan.empty()) return plan.front();
    } catch (const Error&) {
    }
    return std::nullopt;
  }

  std::string resolve_ope_target(const SubTask& task, const SubGoal& goal) {
    if (goal.ope == Ope::PickUp) return task.is_place() ? task.object_id : std::string();
    if (goal.ope == Ope::PutDown) return task.is_place() ? task.instance : std::string();
    return {};
  }

  void after_action(int i, const Action& act, const StepResult& r, int round) {
    detail::AgentRuntime& rt = agents_[static_cast<std::size_t>(i)];
    if (!r.ok()) return;
    if (act.type == ActionType::PickUp) {
      if (misplaced_.count(act.target)) picked_.insert(act.target);
    } else if (act.type == ActionType::PutDown || act.type == ActionType::Drop) {
      const std::string placed =
          rt.current && rt.current->is_place() ? rt.current->object_id : std::string();
      if (!placed.empty()) {
        rt.pool.erase(placed);
        rt.resolved_round[placed] = round;
        rt.current.reset();
      }
    }
  }

  void random_round(int round, RoundRecord& rec) {
    const std::size_t n = agents_.size();
    for (std::size_t i = 0; i < n; ++i) {
      AgentState& a = scene_.agents[i];
      if (a.stopped) continue;
      // Uniform over the agent's action space minus Stop; manipulation
      // parameters uniform over all scene ids (most draws are invalid, as a
      // uniformly random action should be).
      std::vector<Action> options;
      for (ActionType t : {ActionType::MoveAhead, ActionType::MoveRight, ActionType::MoveLeft,
                           ActionType::RotateRight, ActionType::RotateLeft, ActionType::LookUp,
                           ActionType::LookDown})
        options.push_back(Action::simple(t));
      if (a.cap.mani == 1) {
        options.push_back(
            Action::pick(scene_.objects[uniform_index(rng_, scene_.objects.size())].id));
        options.push_back(
            Action::put(scene_.receptacles[uniform_index(rng_, scene_.receptacles.size())].id));
        options.push_back(Action::simple(ActionType::Drop));
      }
      Action act = options[uniform_index(rng_, options.size())];
      StepResult r = step(scene_, static_cast<int>(i), act, kb_, cfg_.world);
      rec.agents[i].actions.push_back(act);
      rec.agents[i].results.push_back(r.status);
      after_action(static_cast<int>(i), act, r, round);
    }
  }

  Scene scene_;
  const Ontology& kb_;
  RuntimeConfig cfg_;
  Rng rng_;
  GeneratorSet gens_;
  CommLedger ledger_;
  std::vector<detail::AgentRuntime> agents_;
  std::vector<std::uint8_t> articulation_;
  std::set<std::string> misplaced_;
  std::set<std::string> picked_;
  bool central_ = false;
};

}  // namespace tidysim

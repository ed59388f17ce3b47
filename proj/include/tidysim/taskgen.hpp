#pragma once

// Meta-task generation from tidy scenes: k misplacements (receptacle move or
// floor drop), the Single/Cross classification, agent start poses, and
// oracle expert demonstrations for imitation learning and acceptance replay.

#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "tidysim/runtime.hpp"

namespace tidysim {

struct Misplacement {
  std::string object_id;
  Placement from;
  Placement to;
  std::string from_room;
  std::string to_room;
};

enum class TaskLabel { Single, Cross };

inline std::string to_string(TaskLabel l) { return l == TaskLabel::Single ? "Single" : "Cross"; }

inline TaskLabel task_label_from_string(const std::string& s) {
  if (s == "Single") return TaskLabel::Single;
  if (s == "Cross") return TaskLabel::Cross;
  throw LookupError("unknown task label '" + s + "'");
}

struct StartPose {
  int x = 0;
  int y = 0;
  int rot = 0;
};

struct TaskSpec {
  std::string scene_ref;  // hash of the source (tidy) scene
  std::uint64_t seed = 0;
  int k = 0;
  TaskLabel label = TaskLabel::Single;
  std::vector<Misplacement> misplacements;
  std::vector<std::vector<StartPose>> agent_starts;  // 5 sets, one pose per agent slot

  nlohmann::json to_json() const {
    nlohmann::json j;
    j["seed"] = seed;
    j["k"] = k;
    j["label"] = to_string(label);
    j["misplacements"] = nlohmann::json::array();
    auto placement_json = [](const Placement& p) {
      nlohmann::json out;
      if (p.kind == PlaceKind::OnReceptacle)
        out["on"] = p.receptacle_id;
      else
        out["floor"] = {p.cell.x, p.cell.y};
      return out;
    };
    for (const auto& m : misplacements) {
      j["misplacements"].push_back({{"object", m.object_id},
                                    {"from", placement_json(m.from)},
                                    {"to", placement_json(m.to)},
                                    {"from_room", m.from_room},
                                    {"to_room", m.to_room}});
    }
    j["agent_starts"] = nlohmann::json::array();
    for (const auto& set : agent_starts) {
      nlohmann::json js = nlohmann::json::array();
      for (const auto& p : set) js.push_back({{"x", p.x}, {"y", p.y}, {"rot", p.rot}});
      j["agent_starts"].push_back(js);
    }
    return j;
  }

  static TaskSpec from_json(const nlohmann::json& j, const std::string& scene_ref) {
    TaskSpec t;
    t.scene_ref = scene_ref;
    t.seed = j.at("seed").get<std::uint64_t>();
    t.k = j.at("k").get<int>();
    t.label = task_label_from_string(j.at("label").get<std::string>());
    auto placement_from = [](const nlohmann::json& p) {
      if (p.contains("on")) return Placement::on(p["on"].get<std::string>());
      return Placement::floor(Cell{p.at("floor")[0].get<int>(), p.at("floor")[1].get<int>()});
    };
    for (const auto& jm : j.at("misplacements")) {
      Misplacement m;
      m.object_id = jm.at("object").get<std::string>();
      m.from = placement_from(jm.at("from"));
      m.to = placement_from(jm.at("to"));
      m.from_room = jm.at("from_room").get<std::string>();
      m.to_room = jm.at("to_room").get<std::string>();
      t.misplacements.push_back(std::move(m));
    }
    for (const auto& js : j.at("agent_starts")) {
      std::vector<StartPose> set;
      for (const auto& jp : js)
        set.push_back(StartPose{jp.at("x").get<int>(), jp.at("y").get<int>(), jp.at("rot").get<int>()});
      t.agent_starts.push_back(std::move(set));
    }
    return t;
  }
};

struct TaskGenConfig {
  int n_agents = 4;       // pose slots per start set; a roster of N uses the first N
  int n_start_sets = 5;
  double drop_prob = 0.5;  // floor drop vs receptacle relocation
  int max_object_retries = 64;
};

// Cross iff at least one misplaced object landed in a different room from
// its initial position.
inline TaskLabel classify_task(const TaskSpec& task, const Scene& scene) {
  for (const auto& m : task.misplacements) {
    auto room_of = [&](const Placement& p) {
      if (p.kind == PlaceKind::OnReceptacle)
        return scene.rooms[static_cast<std::size_t>(scene.receptacle(p.receptacle_id).room)].type;
      return scene.rooms[static_cast<std::size_t>(scene.room_of(p.cell))].type;
    };
    if (room_of(m.from) != room_of(m.to)) return TaskLabel::Cross;
  }
  return TaskLabel::Single;
}

inline TaskSpec generate_meta_task(const Scene& scene, const Ontology& kb, std::uint64_t seed,
                                   const TaskGenConfig& cfg = {}) {
  std::vector<int> pickupable;
  for (std::size_t i = 0; i < scene.objects.size(); ++i) {
    const auto& obj = scene.objects[i];
    if (obj.placement.kind == PlaceKind::Held) throw GenerationError("scene has held objects");
    if (!discriminate(scene, obj.id, kb))
      throw GenerationError("scene is not tidy: '" + obj.id + "' fails D");
    if (kb.type(obj.type).pickupable) pickupable.push_back(static_cast<int>(i));
  }
  if (pickupable.size() < 5)
    throw GenerationError("need at least 5 pickupable objects, have " +
                          std::to_string(pickupable.size()));

  Rng rng(seed);
  TaskSpec task;
  task.scene_ref = scene.hash();
  task.seed = seed;
  task.k = 1 + static_cast<int>(uniform_index(rng, 5));

  Scene work = scene;
  std::set<int> chosen;
  auto walkable = scene.walkable_cells();

  for (int m = 0; m < task.k; ++m) {
    int obj_idx = -1;
    Placement to;
    for (int attempt = 0; attempt < cfg.max_object_retries; ++attempt) {
      int cand = pickupable[uniform_index(rng, pickupable.size())];
      if (chosen.count(cand)) continue;
      const ObjectInstance& obj = scene.objects[static_cast<std::size_t>(cand)];
      if (bernoulli(rng, cfg.drop_prob)) {
        // Throw/drop: a uniformly chosen walkable floor cell always fails D.
        to = Placement::floor(walkable[uniform_index(rng, walkable.size())]);
        obj_idx = cand;
        break;
      }
      // Relocate onto a receptacle instance whose triple fails D.
      std::vector<int> violating;
      for (std::size_t r = 0; r < scene.receptacles.size(); ++r) {
        const auto& rec = scene.receptacles[r];
        const std::string& room = scene.rooms[static_cast<std::size_t>(rec.room)].type;
        if (!kb.is_reasonable(obj.type, rec.type, room)) violating.push_back(static_cast<int>(r));
      }
      if (violating.empty()) continue;  // resample another object
      to = Placement::on(scene.receptacles[static_cast<std::size_t>(
                                               violating[uniform_index(rng, violating.size())])]
                             .id);
      obj_idx = cand;
      break;
    }
    if (obj_idx < 0)
      throw GenerationError("no D-violating placement found within the retry budget");
    chosen.insert(obj_idx);

    const ObjectInstance& obj = scene.objects[static_cast<std::size_t>(obj_idx)];
    Misplacement mp;
    mp.object_id = obj.id;
    mp.from = obj.placement;
    mp.to = to;
    mp.from_room = scene.rooms[static_cast<std::size_t>(scene.object_room(obj))].type;
    work.place_object(obj.id, to);
    mp.to_room = scene.rooms[static_cast<std::size_t>(
                                 work.object_room(work.object(obj.id)))]
                     .type;
    if (discriminate(work, obj.id, kb))
      throw GenerationError("internal: generated placement unexpectedly passes D");
    task.misplacements.push_back(std::move(mp));
  }

  task.label = classify_task(task, scene);

  for (int s = 0; s < cfg.n_start_sets; ++s) {
    std::vector<StartPose> set;
    std::set<Cell> used;
    while (static_cast<int>(set.size()) < cfg.n_agents) {
      Cell c = walkable[uniform_index(rng, walkable.size())];
      if (used.count(c)) continue;
      used.insert(c);
      set.push_back(StartPose{c.x, c.y, 90 * static_cast<int>(uniform_index(rng, 4))});
    }
    task.agent_starts.push_back(std::move(set));
  }
  return task;
}

// The Setting I / Setting II rosters.
inline std::vector<CapabilityVector> roster_setting(const std::string& setting) {
  if (setting == "I") return {{1, 0, 0}, {1, 0, 1}, {1, 1, 1}};
  if (setting == "II") return {{1, 0, 0}, {1, 0, 1}, {1, 1, 1}, {1, 1, 1}};
  if (setting == "SA") return {{1, 1, 1}};
  throw LookupError("unknown setting '" + setting + "' (expected I, II, or SA)");
}

// Instantiate a task: apply misplacements and place the roster at the chosen
// start set (first |roster| pose slots).
inline Scene apply_task(const Scene& scene, const TaskSpec& task,
                        const std::vector<CapabilityVector>& roster, int start_index,
                        const Ontology& kb) {
  if (scene.hash() != task.scene_ref) throw Error("task does not belong to this scene");
  if (start_index < 0 || start_index >= static_cast<int>(task.agent_starts.size()))
    throw Error("start set index out of range");
  const auto& starts = task.agent_starts[static_cast<std::size_t>(start_index)];
  if (roster.size() > starts.size())
    throw Error("roster larger than the task's start-pose sets");

  Scene out = scene;
  for (const auto& m : task.misplacements) out.place_object(m.object_id, m.to);
  out.agents.clear();
  for (std::size_t i = 0; i < roster.size(); ++i) {
    AgentState a;
    a.cap = roster[i];
    a.pose = Pose{starts[i].x, starts[i].y, starts[i].rot, 0};
    out.agents.push_back(a);
  }
  out.finalize(kb);
  return out;
}

// ---------------------------------------------------------------------------
// Expert demonstrations
// ---------------------------------------------------------------------------

struct Demonstration {
  std::string scene_ref;
  std::uint64_t task_seed = 0;
  int start_index = 0;
  std::vector<CapabilityVector> roster;
  std::vector<RoundRecord> rounds;
  bool complete = false;

  nlohmann::json to_json() const {
    nlohmann::json j;
    j["schema_version"] = 1;
    j["scene_ref"] = scene_ref;
    j["task_seed"] = task_seed;
    j["start_index"] = start_index;
    j["roster"] = nlohmann::json::array();
    for (const auto& c : roster) j["roster"].push_back({{"nav", c.nav}, {"mani", c.mani}, {"hei", c.hei}});
    j["complete"] = complete;
    j["rounds"] = nlohmann::json::array();
    for (const auto& r : rounds) {
      nlohmann::json jr;
      jr["round"] = r.round;
      jr["agents"] = nlohmann::json::array();
      for (const auto& a : r.agents) {
        nlohmann::json ja;
        ja["sf"] = a.sf.v;
        ja["emb"] = a.emb;
        ja["subtask"] = {{"kind", a.subtask.is_place() ? "Place" : "Explore"},
                         {"object", a.subtask.object_id},
                         {"o_type", a.subtask.o_type},
                         {"p_type", a.subtask.p_type},
                         {"r_type", a.subtask.r_type},
                         {"instance", a.subtask.instance}};
        ja["subgoal"] = {{"dx", a.subgoal.dx},
                         {"dy", a.subgoal.dy},
                         {"drot", a.subgoal.drot},
                         {"ope", to_string(a.subgoal.ope)},
                         {"stop", a.subgoal.stop}};
        ja["actions"] = nlohmann::json::array();
        for (const auto& act : a.actions)
          ja["actions"].push_back({{"type", to_string(act.type)}, {"target", act.target}});
        ja["results"] = nlohmann::json::array();
        for (auto st : a.results) ja["results"].push_back(to_string(st));
        jr["agents"].push_back(ja);
      }
      j["rounds"].push_back(jr);
    }
    return j;
  }

  static Demonstration from_json(const nlohmann::json& j) {
    Demonstration d;
    d.scene_ref = j.at("scene_ref").get<std::string>();
    d.task_seed = j.at("task_seed").get<std::uint64_t>();
    d.start_index = j.at("start_index").get<int>();
    for (const auto& jc : j.at("roster"))
      d.roster.push_back(CapabilityVector{jc.at("nav").get<int>(), jc.at("mani").get<int>(),
                                          jc.at("hei").get<int>()});
    d.complete = j.at("complete").get<bool>();
    for (const auto& jr : j.at("rounds")) {
      RoundRecord r;
      r.round = jr.at("round").get<int>();
      for (const auto& ja : jr.at("agents")) {
        AgentRoundRecord a;
        a.sf.v = ja.at("sf").get<Vec>();
        a.emb = ja.at("emb").get<Vec>();
        const auto& jt = ja.at("subtask");
        a.subtask.kind = jt.at("kind").get<std::string>() == "Place" ? SubTask::Kind::Place
                                                                     : SubTask::Kind::Explore;
        a.subtask.object_id = jt.at("object").get<std::string>();
        a.subtask.o_type = jt.at("o_type").get<std::string>();
        a.subtask.p_type = jt.at("p_type").get<std::string>();
        a.subtask.r_type = jt.at("r_type").get<std::string>();
        a.subtask.instance = jt.at("instance").get<std::string>();
        const auto& jg = ja.at("subgoal");
        a.subgoal.dx = jg.at("dx").get<int>();
        a.subgoal.dy = jg.at("dy").get<int>();
        a.subgoal.drot = jg.at("drot").get<int>();
        a.subgoal.ope = ope_from_string(jg.at("ope").get<std::string>());
        a.subgoal.stop = jg.at("stop").get<bool>();
        for (const auto& jact : ja.at("actions"))
          a.actions.push_back(Action{action_type_from_string(jact.at("type").get<std::string>()),
                                     jact.at("target").get<std::string>()});
        for (const auto& jst : ja.at("results"))
          a.results.push_back(step_status_from_string(jst.get<std::string>()));
        r.agents.push_back(std::move(a));
      }
      d.rounds.push_back(std::move(r));
    }
    return d;
  }
};

// The deterministic heuristic run with full oracle state: all misplacement
// locations preloaded and shared, no communication cost, zero noise.
inline Demonstration generate_expert_demo(const Scene& scene, const TaskSpec& task,
                                          const std::vector<CapabilityVector>& roster,
                                          const Ontology& kb, int start_index = 0,
                                          int max_steps = 300) {
  bool any_mani = false;
  for (const auto& c : roster) any_mani = any_mani || c.mani == 1;
  if (!any_mani) throw GenerationError("expert demo requires at least one mani-capable agent");

  Scene start = apply_task(scene, task, roster, start_index, kb);
  RuntimeConfig cfg;
  cfg.protocol = Protocol::NoComm;
  cfg.policy = PolicyKind::Heuristic;
  cfg.oracle_detections = true;
  cfg.oracle_full_map = true;
  cfg.max_steps = max_steps;
  cfg.seed = task.seed;

  EpisodeEngine engine(start, kb, cfg);
  EpisodeOutcome outcome = engine.run();
  if (!outcome.complete) {
    std::string stuck;
    for (const auto& [id, flags] : outcome.misplaced)
      if (!flags.tidy_at_end) {
        stuck = id;
        break;
      }
    throw GenerationError("expert demonstration failed to complete; stuck object: " +
                          (stuck.empty() ? std::string("<none>") : stuck));
  }

  Demonstration demo;
  demo.scene_ref = task.scene_ref;
  demo.task_seed = task.seed;
  demo.start_index = start_index;
  demo.roster = roster;
  demo.rounds = std::move(outcome.log);
  demo.complete = true;
  return demo;
}

// Replays a demonstration's recorded actions through the action layer only.
// Returns the final scene.
inline Scene replay_demo(const Scene& scene, const TaskSpec& task, const Demonstration& demo,
                         const Ontology& kb) {
  Scene s = apply_task(scene, task, demo.roster, demo.start_index, kb);
  for (const auto& round : demo.rounds) {
    for (std::size_t i = 0; i < round.agents.size(); ++i) {
      for (const auto& act : round.agents[i].actions) step(s, static_cast<int>(i), act, kb);
    }
  }
  return s;
}

}  // namespace tidysim

#pragma once

// Evaluation harness: episode records and trajectory logs, the six metrics
// (Suc, %PS, %FM, #PL, ACm, CES) with Single/Cross/All slices, the
// experiment-suite runner with its worker pool, and bit-exact replay with
// ASCII rendering.

#include <atomic>
#include <cctype>
#include <chrono>
#include <fstream>
#include <iomanip>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "tidysim/learn.hpp"
#include "tidysim/taskgen.hpp"

namespace tidysim {

struct ExperimentConfig {
  std::string setting = "I";  // I | II | SA | custom
  std::vector<CapabilityVector> custom_roster;
  Protocol protocol = Protocol::HanGrCom;
  PolicyKind policy = PolicyKind::Heuristic;
  DetectorNoise noise;
  WorldConfig world;
  CommConfig comm;
  int max_steps = 300;
  bool oracle = false;                // SA(Oracle): misplacement triples known at start
  std::set<std::string> ablations;    // know, misobjdec, rearecpre, comm, hierdec
  std::string model_path;             // learned / flat policies

  std::vector<CapabilityVector> roster() const {
    if (setting == "custom") {
      if (custom_roster.empty()) throw Error("custom setting requires a roster");
      return custom_roster;
    }
    return roster_setting(setting);
  }

  nlohmann::json to_json() const {
    nlohmann::json j;
    j["setting"] = setting;
    j["protocol"] = to_string(protocol);
    j["policy"] = to_string(policy);
    j["noise"] = {{"fp", noise.fp}, {"fn", noise.fn}};
    j["r_vis"] = world.r_vis;
    j["interaction_range"] = world.interaction_range;
    j["comm"] = {{"d", comm.d},
                 {"d_sf", comm.d_sf},
                 {"mu", comm.mu},
                 {"delta", comm.delta},
                 {"generator_preset", comm.generator_preset},
                 {"generator_seed", comm.generator_seed}};
    j["max_steps"] = max_steps;
    j["oracle"] = oracle;
    j["ablations"] = ablations;
    if (setting == "custom") {
      j["roster"] = nlohmann::json::array();
      for (const auto& c : custom_roster)
        j["roster"].push_back({{"nav", c.nav}, {"mani", c.mani}, {"hei", c.hei}});
    }
    return j;
  }
};

// Maps an experiment config onto the engine: ablation switches, oracle mode,
// and the random policy all constrain the protocol/policy pair.
inline RuntimeConfig runtime_config(const ExperimentConfig& cfg, std::uint64_t seed,
                                    const ImitationModel* model) {
  RuntimeConfig rt;
  rt.world = cfg.world;
  rt.comm = cfg.comm;
  rt.protocol = cfg.protocol;
  rt.policy = cfg.policy;
  rt.noise = cfg.noise;
  rt.max_steps = cfg.max_steps;
  rt.seed = seed;
  rt.oracle_detections = cfg.oracle;
  rt.oracle_full_map = false;
  if (cfg.ablations.count("know")) rt.ablate_knowledge = true;
  if (cfg.ablations.count("misobjdec")) rt.ablate_detector = true;
  if (cfg.ablations.count("rearecpre")) rt.ablate_predictor = true;
  if (cfg.ablations.count("comm")) rt.protocol = Protocol::NoComm;
  if (cfg.ablations.count("hierdec")) rt.policy = PolicyKind::Flat;
  if (rt.policy == PolicyKind::Random) rt.protocol = Protocol::NoComm;
  if (cfg.roster().size() == 1) rt.protocol = Protocol::NoComm;  // nobody to talk to

  if (rt.policy == PolicyKind::Learned || rt.policy == PolicyKind::Flat) {
    if (!model) throw Error("policy '" + to_string(rt.policy) + "' requires a model");
    rt.learned_subgoal = [model](int agent, const Vec& feat) {
      Vec sf(feat.begin(), feat.begin() + model->d_sf);
      Vec emb(feat.begin() + model->d_sf, feat.end());
      return model->predict(static_cast<std::size_t>(agent), sf, emb).subgoal;
    };
  }
  return rt;
}

struct TrajectoryEntry {
  int round = 0;
  int agent = 0;
  Action action;
  StepStatus result = StepStatus::Success;
};

struct EpisodeRecord {
  std::string scene_ref;
  std::uint64_t task_seed = 0;
  int start_index = 0;
  TaskLabel label = TaskLabel::Single;
  std::uint64_t seed = 0;
  int n_agents = 0;
  int k = 0;
  int k_detected_picked = 0;  // K_i^det
  int k_replaced = 0;         // K_i^suc
  bool success = false;       // R_i
  int len = 0;                // Len_i
  long long total_dims = 0;   // Total_i
  std::string final_hash;
  std::vector<TrajectoryEntry> trajectory;
  double wall_ms = 0.0;  // measurement only; excluded from canonical bytes

  // Canonical serialization: everything above except wall_ms, so identical
  // (task, config, seed) runs produce byte-identical records.
  nlohmann::json canonical_json() const {
    nlohmann::json j;
    j["schema_version"] = 1;
    j["scene_ref"] = scene_ref;
    j["task_seed"] = task_seed;
    j["start_index"] = start_index;
    j["label"] = to_string(label);
    j["seed"] = seed;
    j["n_agents"] = n_agents;
    j["k"] = k;
    j["k_detected_picked"] = k_detected_picked;
    j["k_replaced"] = k_replaced;
    j["success"] = success;
    j["len"] = len;
    j["total_dims"] = total_dims;
    j["final_hash"] = final_hash;
    j["trajectory"] = nlohmann::json::array();
    for (const auto& e : trajectory)
      j["trajectory"].push_back({{"round", e.round},
                                 {"agent", e.agent},
                                 {"action", to_string(e.action.type)},
                                 {"target", e.action.target},
                                 {"result", to_string(e.result)}});
    return j;
  }

  static EpisodeRecord from_json(const nlohmann::json& j) {
    EpisodeRecord r;
    r.scene_ref = j.at("scene_ref").get<std::string>();
    r.task_seed = j.at("task_seed").get<std::uint64_t>();
    r.start_index = j.at("start_index").get<int>();
    r.label = task_label_from_string(j.at("label").get<std::string>());
    r.seed = j.at("seed").get<std::uint64_t>();
    r.n_agents = j.at("n_agents").get<int>();
    r.k = j.at("k").get<int>();
    r.k_detected_picked = j.at("k_detected_picked").get<int>();
    r.k_replaced = j.at("k_replaced").get<int>();
    r.success = j.at("success").get<bool>();
    r.len = j.at("len").get<int>();
    r.total_dims = j.at("total_dims").get<long long>();
    r.final_hash = j.at("final_hash").get<std::string>();
    for (const auto& je : j.at("trajectory")) {
      TrajectoryEntry e;
      e.round = je.at("round").get<int>();
      e.agent = je.at("agent").get<int>();
      e.action = Action{action_type_from_string(je.at("action").get<std::string>()),
                        je.at("target").get<std::string>()};
      e.result = step_status_from_string(je.at("result").get<std::string>());
      r.trajectory.push_back(e);
    }
    return r;
  }
};

inline EpisodeRecord run_episode(const Scene& scene, const TaskSpec& task, const Ontology& kb,
                                 const ExperimentConfig& cfg, int start_index, std::uint64_t seed,
                                 const ImitationModel* model = nullptr) {
  auto t0 = std::chrono::steady_clock::now();
  Scene start = apply_task(scene, task, cfg.roster(), start_index, kb);
  EpisodeEngine engine(start, kb, runtime_config(cfg, seed, model));
  EpisodeOutcome out = engine.run();

  EpisodeRecord rec;
  rec.scene_ref = task.scene_ref;
  rec.task_seed = task.seed;
  rec.start_index = start_index;
  rec.label = task.label;
  rec.seed = seed;
  rec.n_agents = out.n_agents;
  rec.k = task.k;
  rec.success = out.complete;
  rec.len = out.rounds;
  rec.total_dims = out.ledger.total_dims;
  for (const auto& [id, flags] : out.misplaced) {
    if (flags.picked) ++rec.k_detected_picked;
    if (flags.tidy_at_end) ++rec.k_replaced;
  }
  rec.final_hash = out.final_scene.hash();
  for (const auto& round : out.log)
    for (std::size_t i = 0; i < round.agents.size(); ++i)
      for (std::size_t a = 0; a < round.agents[i].actions.size(); ++a)
        rec.trajectory.push_back(TrajectoryEntry{round.round, static_cast<int>(i),
                                                 round.agents[i].actions[a],
                                                 round.agents[i].results[a]});
  rec.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0)
                    .count();
  return rec;
}

// ---------------------------------------------------------------------------
// Metrics
// ---------------------------------------------------------------------------

struct MetricsRow {
  int episodes = 0;
  double suc = 0.0;
  double ps = 0.0;
  double fm = 0.0;
  double pl = 0.0;
  double acm = 0.0;
  std::optional<double> ces;  // empty: not applicable (ACm = 0 or no SA ref)
  bool defined() const { return episodes > 0; }
};

struct MetricsReport {
  MetricsRow single, cross, all;

  const MetricsRow& slice(TaskLabel l) const { return l == TaskLabel::Single ? single : cross; }
};

// The six metric formulas, per slice. `suc_sa` is the single-agent baseline's
// success rate per slice on the same task set (empty: CES not applicable).
inline MetricsReport compute_metrics(const std::vector<EpisodeRecord>& records,
                                     const std::optional<MetricsReport>& sa = std::nullopt) {
  MetricsReport rep;
  auto fill = [&](MetricsRow& row, TaskLabel want, bool all_slice) {
    double suc = 0, ps = 0, fm = 0, pl = 0, acm = 0;
    int n = 0;
    for (const auto& r : records) {
      if (!all_slice && r.label != want) continue;
      ++n;
      suc += r.success ? 1.0 : 0.0;
      ps += static_cast<double>(r.k_replaced) / r.k;
      fm += static_cast<double>(r.k_detected_picked) / r.k;
      pl += r.len;
      acm += static_cast<double>(r.total_dims) / (static_cast<double>(r.len) * r.n_agents);
    }
    row.episodes = n;
    if (n == 0) return;  // slice reported as not-applicable, never fabricated
    row.suc = suc / n;
    row.ps = ps / n;
    row.fm = fm / n;
    row.pl = pl / n;
    row.acm = acm / n;
  };
  fill(rep.single, TaskLabel::Single, false);
  fill(rep.cross, TaskLabel::Cross, false);
  fill(rep.all, TaskLabel::Single, true);

  if (sa) {
    auto ces = [](MetricsRow& row, const MetricsRow& ref) {
      if (!row.defined() || !ref.defined()) return;
      if (row.acm <= 0.0) return;  // reported as a dash
      row.ces = std::max(0.0, 10000.0 * (row.suc - ref.suc) / row.acm);
    };
    ces(rep.single, sa->single);
    ces(rep.cross, sa->cross);
    ces(rep.all, sa->all);
  }
  return rep;
}

// ---------------------------------------------------------------------------
// Suite runner
// ---------------------------------------------------------------------------

struct SuiteItem {
  std::string name;
  ExperimentConfig cfg;
};

struct SuiteEpisodeRef {
  int scene_index = 0;
  int task_index = 0;
  int start_index = 0;
};

struct SuiteItemResult {
  std::string name;
  MetricsReport metrics;
  std::vector<EpisodeRecord> records;
};

struct SuiteOptions {
  int n_starts = 5;
  std::uint64_t base_seed = 1;
  int workers = 4;
  bool with_sa_baseline = true;  // run SA on the same tasks for CES
};

// Episode seeds derive from content, not scheduling, so worker count never
// changes results.
inline std::uint64_t episode_seed(std::uint64_t base, const std::string& item,
                                  std::uint64_t task_seed, int start_index) {
  std::string key = item + "|" + std::to_string(task_seed) + "|" + std::to_string(start_index) +
                    "|" + std::to_string(base);
  return fnv1a64(key);
}

inline std::vector<EpisodeRecord> run_batch(const std::vector<const Scene*>& scenes,
                                            const std::vector<std::vector<TaskSpec>>& tasks,
                                            const Ontology& kb, const ExperimentConfig& cfg,
                                            const std::string& item_name, const SuiteOptions& opt,
                                            const ImitationModel* model) {
  std::vector<SuiteEpisodeRef> refs;
  for (std::size_t s = 0; s < scenes.size(); ++s)
    for (std::size_t t = 0; t < tasks[s].size(); ++t)
      for (int start = 0; start < opt.n_starts; ++start)
        refs.push_back(SuiteEpisodeRef{static_cast<int>(s), static_cast<int>(t), start});

  std::vector<EpisodeRecord> out(refs.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (;;) {
      std::size_t i = next.fetch_add(1);
      if (i >= refs.size()) return;
      const SuiteEpisodeRef& ref = refs[i];
      const Scene& scene = *scenes[static_cast<std::size_t>(ref.scene_index)];
      const TaskSpec& task =
          tasks[static_cast<std::size_t>(ref.scene_index)][static_cast<std::size_t>(ref.task_index)];
      std::uint64_t seed = episode_seed(opt.base_seed, item_name, task.seed, ref.start_index);
      out[i] = run_episode(scene, task, kb, cfg, ref.start_index, seed, model);
    }
  };
  int n_workers = std::max(1, opt.workers);
  std::vector<std::thread> pool;
  for (int w = 0; w < n_workers; ++w) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
  return out;
}

inline std::vector<SuiteItemResult> run_suite(const std::vector<const Scene*>& scenes,
                                              const std::vector<std::vector<TaskSpec>>& tasks,
                                              const Ontology& kb,
                                              const std::vector<SuiteItem>& items,
                                              const SuiteOptions& opt = {},
                                              const ImitationModel* model = nullptr) {
  if (scenes.empty() || tasks.size() != scenes.size()) throw Error("suite: empty task set");

  std::optional<MetricsReport> sa;
  if (opt.with_sa_baseline) {
    ExperimentConfig sa_cfg;
    sa_cfg.setting = "SA";
    sa_cfg.policy = PolicyKind::Heuristic;
    sa_cfg.protocol = Protocol::NoComm;
    auto sa_records = run_batch(scenes, tasks, kb, sa_cfg, "SA-ref", opt, nullptr);
    sa = compute_metrics(sa_records);
  }

  std::vector<SuiteItemResult> results;
  for (const auto& item : items) {
    SuiteItemResult res;
    res.name = item.name;
    res.records = run_batch(scenes, tasks, kb, item.cfg, item.name, opt, model);
    res.metrics = compute_metrics(res.records, sa);
    results.push_back(std::move(res));
  }
  return results;
}

// ---------------------------------------------------------------------------
// Report formatting
// ---------------------------------------------------------------------------

inline std::string format_cell(double v, int prec) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(prec) << v;
  return os.str();
}

inline std::string metrics_csv(const std::vector<SuiteItemResult>& results) {
  std::ostringstream os;
  os << "method,slice,episodes,Suc,PS,FM,PL,ACm,CES\n";
  for (const auto& res : results) {
    auto row = [&](const char* slice, const MetricsRow& r) {
      os << res.name << ',' << slice << ',' << r.episodes << ',';
      if (!r.defined()) {
        os << ",,,,,\n";
        return;
      }
      os << format_cell(r.suc, 3) << ',' << format_cell(r.ps, 3) << ',' << format_cell(r.fm, 3)
         << ',' << format_cell(r.pl, 1) << ',' << format_cell(r.acm, 1) << ',';
      if (r.ces)
        os << format_cell(*r.ces, 1);
      else
        os << "-";
      os << '\n';
    };
    row("Single", res.metrics.single);
    row("Cross", res.metrics.cross);
    row("All", res.metrics.all);
  }
  return os.str();
}

// Human-readable table mirroring the paper's column layout: one row per
// method, Single/Cross/All columns per metric.
inline std::string metrics_table(const std::vector<SuiteItemResult>& results) {
  std::ostringstream os;
  const int name_w = 18;
  os << std::left << std::setw(name_w) << "Method";
  for (const char* metric : {"Suc", "%PS", "%FM", "#PL", "ACm", "CES"})
    for (const char* slice : {"Sgl", "Crs", "All"}) {
      std::string head = std::string(metric) + "/" + slice;
      os << std::right << std::setw(10) << head;
    }
  os << '\n';
  for (const auto& res : results) {
    os << std::left << std::setw(name_w) << res.name;
    auto cells = [&](auto getter, int prec, bool is_ces) {
      for (const MetricsRow* r : {&res.metrics.single, &res.metrics.cross, &res.metrics.all}) {
        std::string cell = "-";
        if (r->defined()) {
          if (is_ces)
            cell = r->ces ? format_cell(*r->ces, prec) : "-";
          else
            cell = format_cell(getter(*r), prec);
        }
        os << std::right << std::setw(10) << cell;
      }
    };
    cells([](const MetricsRow& r) { return r.suc; }, 3, false);
    cells([](const MetricsRow& r) { return r.ps; }, 3, false);
    cells([](const MetricsRow& r) { return r.fm; }, 3, false);
    cells([](const MetricsRow& r) { return r.pl; }, 1, false);
    cells([](const MetricsRow& r) { return r.acm; }, 1, false);
    cells([](const MetricsRow& r) { return r.suc; }, 1, true);
    os << '\n';
  }
  return os.str();
}

// ---------------------------------------------------------------------------
// Replay
// ---------------------------------------------------------------------------

inline std::string ascii_frame(const Scene& scene, const Ontology& kb) {
  std::vector<std::string> grid(static_cast<std::size_t>(scene.height),
                                std::string(static_cast<std::size_t>(scene.width), '#'));
  for (int y = 0; y < scene.height; ++y)
    for (int x = 0; x < scene.width; ++x)
      if (!scene.is_wall({x, y})) grid[static_cast<std::size_t>(y)][static_cast<std::size_t>(x)] = '.';
  for (const auto& rec : scene.receptacles)
    grid[static_cast<std::size_t>(rec.cell.y)][static_cast<std::size_t>(rec.cell.x)] =
        static_cast<char>(std::tolower(rec.type[0]));
  for (const auto& obj : scene.objects) {
    if (obj.placement.kind != PlaceKind::OnFloor) continue;
    Cell c = obj.placement.cell;
    grid[static_cast<std::size_t>(c.y)][static_cast<std::size_t>(c.x)] =
        discriminate(scene, obj.id, kb) ? 'o' : '!';
  }
  for (std::size_t i = 0; i < scene.agents.size(); ++i) {
    const Pose& p = scene.agents[i].pose;
    grid[static_cast<std::size_t>(p.y)][static_cast<std::size_t>(p.x)] =
        static_cast<char>('0' + (i % 10));
  }
  std::string out;
  for (const auto& row : grid) {
    out += row;
    out += '\n';
  }
  return out;
}

struct ReplayResult {
  Scene final_scene;
  std::vector<std::string> frames;  // one per round when rendering is on
};

// Bit-exact reconstruction of a recorded episode. Verifies the scene hash,
// every step result, and the final-scene hash; throws ReplayError on any
// mismatch, reporting the record index.
inline ReplayResult replay(const EpisodeRecord& rec, const Scene& scene, const TaskSpec& task,
                           const std::vector<CapabilityVector>& roster, const Ontology& kb,
                           const WorldConfig& wcfg = {}, bool render = false) {
  if (scene.hash() != rec.scene_ref)
    throw ReplayError("scene hash mismatch: log was recorded on a different scene");
  ReplayResult out;
  Scene s = apply_task(scene, task, roster, rec.start_index, kb);
  int current_round = 0;
  for (std::size_t i = 0; i < rec.trajectory.size(); ++i) {
    const TrajectoryEntry& e = rec.trajectory[i];
    if (e.round != current_round && current_round != 0 && render)
      out.frames.push_back(ascii_frame(s, kb));
    current_round = e.round;
    StepResult r;
    try {
      r = step(s, e.agent, e.action, kb, wcfg);
    } catch (const Error& err) {
      throw ReplayError("log corrupt at record " + std::to_string(i) + ": " + err.what());
    }
    if (r.status != e.result)
      throw ReplayError("divergence at record " + std::to_string(i) + ": got " +
                        to_string(r.status) + ", recorded " + to_string(e.result));
  }
  if (render) out.frames.push_back(ascii_frame(s, kb));
  if (s.hash() != rec.final_hash)
    throw ReplayError("final scene hash mismatch after replay");
  out.final_scene = std::move(s);
  return out;
}

}  // namespace tidysim

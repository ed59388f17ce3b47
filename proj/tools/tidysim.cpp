// Command-line front end: scene/task generation, expert demonstrations,
// imitation training, evaluation suites, and trajectory replay.

#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "tidysim/tidysim.hpp"

using namespace tidysim;
namespace fs = std::filesystem;

namespace {

nlohmann::json read_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open '" + path + "'");
  nlohmann::json j;
  in >> j;
  return j;
}

void write_text(const std::string& path, const std::string& text) {
  fs::path p(path);
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream out(path);
  if (!out) throw Error("cannot write '" + path + "'");
  out << text;
}

struct TaskFile {
  std::string scene_ref;
  std::vector<TaskSpec> tasks;

  nlohmann::json to_json() const {
    nlohmann::json j;
    j["schema_version"] = 1;
    j["scene_ref"] = scene_ref;
    j["tasks"] = nlohmann::json::array();
    for (const auto& t : tasks) j["tasks"].push_back(t.to_json());
    return j;
  }

  static TaskFile load(const std::string& path) {
    nlohmann::json j = read_json(path);
    TaskFile f;
    f.scene_ref = j.at("scene_ref").get<std::string>();
    for (const auto& jt : j.at("tasks")) f.tasks.push_back(TaskSpec::from_json(jt, f.scene_ref));
    return f;
  }
};

std::vector<Demonstration> load_demo_files(const std::vector<std::string>& paths) {
  std::vector<Demonstration> demos;
  for (const auto& path : paths) {
    nlohmann::json j = read_json(path);
    for (const auto& jd : j.at("demos")) demos.push_back(Demonstration::from_json(jd));
  }
  return demos;
}

// "nav,mani,hei;nav,mani,hei;..." -> capability vectors.
std::vector<CapabilityVector> parse_roster(const std::string& spec) {
  std::vector<CapabilityVector> roster;
  std::istringstream agents(spec);
  std::string one;
  while (std::getline(agents, one, ';')) {
    int v[3] = {1, 0, 0};
    std::istringstream fields(one);
    std::string f;
    for (int k = 0; k < 3 && std::getline(fields, f, ','); ++k) v[k] = std::stoi(f);
    roster.push_back(CapabilityVector{v[0], v[1], v[2]});
  }
  return roster;
}

ExperimentConfig make_config(const std::string& setting, const std::string& protocol,
                             const std::string& policy, const std::vector<std::string>& ablations,
                             bool oracle, int max_steps, double noise_fp, double noise_fn,
                             double mu, double delta, const std::string& preset) {
  ExperimentConfig cfg;
  cfg.setting = setting;
  cfg.protocol = protocol_from_string(protocol);
  cfg.policy = policy_from_string(policy);
  cfg.oracle = oracle;
  cfg.max_steps = max_steps;
  cfg.noise.fp = noise_fp;
  cfg.noise.fn = noise_fn;
  cfg.comm.mu = mu;
  cfg.comm.delta = delta;
  cfg.comm.generator_preset = preset;
  for (const auto& a : ablations) {
    static const std::set<std::string> known{"know", "misobjdec", "rearecpre", "comm", "hierdec"};
    if (!known.count(a)) throw Error("unknown ablation '" + a + "'");
    cfg.ablations.insert(a);
  }
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"tidysim: heterogeneous multi-agent tidying-up simulator and harness"};
  app.require_subcommand(1);

  std::string ontology_path = "data/ontology.json";
  app.add_option("--ontology", ontology_path, "ontology file")->capture_default_str();

  // ---- gen ----
  auto* gen = app.add_subcommand("gen", "generate meta-tasks from a tidy scene");
  std::string gen_scene, gen_out = "tasks.json";
  std::uint64_t gen_seed = 1;
  int gen_count = 10, gen_agents = 4, gen_starts = 5;
  gen->add_option("--scene", gen_scene, "scene file")->required();
  gen->add_option("--seed", gen_seed, "base seed")->capture_default_str();
  gen->add_option("--count", gen_count, "meta-tasks to generate")->capture_default_str();
  gen->add_option("--agents", gen_agents, "pose slots per start set")->capture_default_str();
  gen->add_option("--starts", gen_starts, "start sets per task")->capture_default_str();
  gen->add_option("--out", gen_out, "output task file")->capture_default_str();

  // ---- demo ----
  auto* demo = app.add_subcommand("demo", "generate expert demonstrations for tasks");
  std::string demo_scene, demo_tasks, demo_out = "demos.json", demo_setting = "I";
  int demo_task_index = -1, demo_start = -1, demo_max_steps = 300;
  demo->add_option("--scene", demo_scene, "scene file")->required();
  demo->add_option("--tasks", demo_tasks, "task file")->required();
  demo->add_option("--setting", demo_setting, "roster: I, II, or SA")->capture_default_str();
  demo->add_option("--task-index", demo_task_index, "only this task (default: all)");
  demo->add_option("--start", demo_start, "only this start set (default: all)");
  demo->add_option("--max-steps", demo_max_steps, "step budget")->capture_default_str();
  demo->add_option("--out", demo_out, "output demo file")->capture_default_str();

  // ---- train ----
  auto* train = app.add_subcommand("train", "behavior-clone linear heads from demonstrations");
  std::vector<std::string> train_demos;
  std::string train_out = "model.json";
  TrainConfig tc;
  train->add_option("--demos", train_demos, "demo file(s)")->required();
  train->add_option("--epochs", tc.epochs, "epochs")->capture_default_str();
  train->add_option("--lr", tc.lr, "learning rate")->capture_default_str();
  train->add_option("--batch", tc.batch, "mini-batch size")->capture_default_str();
  train->add_option("--seed", tc.seed, "shuffle seed")->capture_default_str();
  train->add_option("--out", train_out, "output model file")->capture_default_str();

  // ---- eval ----
  auto* eval = app.add_subcommand("eval", "run an evaluation suite and report metrics");
  std::vector<std::string> eval_scenes, eval_tasks, eval_ablations;
  std::string eval_setting = "I", eval_protocol = "HanGrCom", eval_policy = "heuristic";
  std::string eval_model, eval_out = "out", eval_name;
  bool eval_oracle = false, eval_no_sa = false;
  int eval_max_steps = 300, eval_starts = 5, eval_workers = 4;
  std::uint64_t eval_seed = 1;
  double eval_fp = 0.0, eval_fn = 0.0, eval_mu = 0.2, eval_delta = 0.8;
  std::string eval_preset = "semantic";
  eval->add_option("--scene", eval_scenes, "scene file(s), paired with --tasks")->required();
  eval->add_option("--tasks", eval_tasks, "task file(s), one per scene")->required();
  std::string eval_roster;
  eval->add_option("--setting", eval_setting, "roster: I, II, SA, custom")->capture_default_str();
  eval->add_option("--roster", eval_roster,
                   "custom roster as 'nav,mani,hei;...' (with --setting custom)");
  eval->add_option("--protocol", eval_protocol,
                   "HanGrCom|CondComm|CmprComm|IntenComm|BroadComm|CentralComm|NoComm")
      ->capture_default_str();
  eval->add_option("--policy", eval_policy, "heuristic|learned|random|flat")->capture_default_str();
  eval->add_option("--model", eval_model, "model file for learned/flat policies");
  eval->add_option("--ablation", eval_ablations, "know|misobjdec|rearecpre|comm|hierdec");
  eval->add_flag("--oracle", eval_oracle, "SA(Oracle): misplacement locations known at start");
  eval->add_option("--max-steps", eval_max_steps, "step budget")->capture_default_str();
  eval->add_option("--starts", eval_starts, "start sets per task")->capture_default_str();
  eval->add_option("--seed", eval_seed, "suite base seed")->capture_default_str();
  eval->add_option("--workers", eval_workers, "episode worker threads")->capture_default_str();
  eval->add_option("--noise-fp", eval_fp, "detector false-positive rate")->capture_default_str();
  eval->add_option("--noise-fn", eval_fn, "detector false-negative rate")->capture_default_str();
  eval->add_option("--mu", eval_mu, "receive threshold")->capture_default_str();
  eval->add_option("--delta", eval_delta, "receptivity threshold")->capture_default_str();
  eval->add_option("--generators", eval_preset, "semantic|random vector generators")
      ->capture_default_str();
  eval->add_flag("--no-sa", eval_no_sa, "skip the SA baseline (CES reported as dashes)");
  eval->add_option("--name", eval_name, "label for the result row");
  eval->add_option("--out", eval_out, "output directory")->capture_default_str();

  // ---- replay ----
  auto* rep = app.add_subcommand("replay", "replay a recorded episode bit-exactly");
  std::string rep_scene, rep_tasks, rep_records, rep_setting = "I";
  int rep_index = 0;
  bool rep_ascii = false;
  rep->add_option("--scene", rep_scene, "scene file")->required();
  rep->add_option("--tasks", rep_tasks, "task file the episode ran against")->required();
  rep->add_option("--records", rep_records, "records file written by eval")->required();
  rep->add_option("--index", rep_index, "episode index within the file")->capture_default_str();
  rep->add_option("--setting", rep_setting, "roster used at record time")->capture_default_str();
  rep->add_flag("--ascii", rep_ascii, "print per-round ASCII frames");

  CLI11_PARSE(app, argc, argv);

  try {
    Ontology kb = Ontology::load(ontology_path);

    if (*gen) {
      Scene scene = Scene::load(gen_scene, kb);
      TaskFile file;
      file.scene_ref = scene.hash();
      TaskGenConfig tg;
      tg.n_agents = gen_agents;
      tg.n_start_sets = gen_starts;
      for (int i = 0; i < gen_count; ++i)
        file.tasks.push_back(
            generate_meta_task(scene, kb, gen_seed + static_cast<std::uint64_t>(i), tg));
      write_text(gen_out, file.to_json().dump(2) + "\n");
      int cross = 0;
      for (const auto& t : file.tasks) cross += t.label == TaskLabel::Cross ? 1 : 0;
      std::cout << "wrote " << file.tasks.size() << " tasks (" << cross << " Cross) to " << gen_out
                << "\n";
      return 0;
    }

    if (*demo) {
      Scene scene = Scene::load(demo_scene, kb);
      TaskFile tasks = TaskFile::load(demo_tasks);
      auto roster = roster_setting(demo_setting);
      nlohmann::json out;
      out["schema_version"] = 1;
      out["demos"] = nlohmann::json::array();
      int produced = 0;
      for (std::size_t t = 0; t < tasks.tasks.size(); ++t) {
        if (demo_task_index >= 0 && static_cast<int>(t) != demo_task_index) continue;
        const TaskSpec& task = tasks.tasks[t];
        for (int s = 0; s < static_cast<int>(task.agent_starts.size()); ++s) {
          if (demo_start >= 0 && s != demo_start) continue;
          Demonstration d = generate_expert_demo(scene, task, roster, kb, s, demo_max_steps);
          out["demos"].push_back(d.to_json());
          ++produced;
        }
      }
      write_text(demo_out, out.dump() + "\n");
      std::cout << "wrote " << produced << " demonstrations to " << demo_out << "\n";
      return 0;
    }

    if (*train) {
      auto demos = load_demo_files(train_demos);
      ImitationModel model = train_imitation(demos, kb, tc);
      model.save(train_out);
      double acc = subgoal_tuple_accuracy(model, demos);
      std::cout << "trained on " << demos.size() << " demonstrations; final epoch loss "
                << model.loss_trace.back() << "; training sub-goal tuple accuracy " << acc << "\n"
                << "model written to " << train_out << "\n";
      return 0;
    }

    if (*eval) {
      if (eval_scenes.size() != eval_tasks.size())
        throw Error("--scene and --tasks must be paired");
      std::vector<Scene> scenes;
      std::vector<std::vector<TaskSpec>> task_sets;
      for (std::size_t i = 0; i < eval_scenes.size(); ++i) {
        scenes.push_back(Scene::load(eval_scenes[i], kb));
        TaskFile f = TaskFile::load(eval_tasks[i]);
        if (f.scene_ref != scenes.back().hash())
          throw Error("task file '" + eval_tasks[i] + "' does not match scene '" +
                      eval_scenes[i] + "'");
        task_sets.push_back(std::move(f.tasks));
      }
      std::vector<const Scene*> scene_ptrs;
      for (const auto& s : scenes) scene_ptrs.push_back(&s);

      ExperimentConfig cfg =
          make_config(eval_setting, eval_protocol, eval_policy, eval_ablations, eval_oracle,
                      eval_max_steps, eval_fp, eval_fn, eval_mu, eval_delta, eval_preset);
      if (!eval_roster.empty()) cfg.custom_roster = parse_roster(eval_roster);
      std::optional<ImitationModel> model;
      if (!eval_model.empty()) model = ImitationModel::load(eval_model);

      SuiteItem item;
      item.name = eval_name.empty() ? (to_string(cfg.protocol) + "/" + eval_setting) : eval_name;
      item.cfg = cfg;

      SuiteOptions opt;
      opt.n_starts = eval_starts;
      opt.base_seed = eval_seed;
      opt.workers = eval_workers;
      opt.with_sa_baseline = !eval_no_sa;

      auto results =
          run_suite(scene_ptrs, task_sets, kb, {item}, opt, model ? &*model : nullptr);

      fs::create_directories(eval_out);
      write_text(eval_out + "/metrics.csv", metrics_csv(results));
      write_text(eval_out + "/table.txt", metrics_table(results));
      nlohmann::json recs;
      recs["schema_version"] = 1;
      recs["config"] = cfg.to_json();
      recs["records"] = nlohmann::json::array();
      for (const auto& r : results[0].records) recs["records"].push_back(r.canonical_json());
      write_text(eval_out + "/records.json", recs.dump() + "\n");

      std::cout << metrics_table(results) << "\nwrote " << results[0].records.size()
                << " episode records to " << eval_out << "/records.json\n";
      return 0;
    }

    if (*rep) {
      Scene scene = Scene::load(rep_scene, kb);
      TaskFile tasks = TaskFile::load(rep_tasks);
      nlohmann::json j = read_json(rep_records);
      const auto& arr = j.at("records");
      if (rep_index < 0 || rep_index >= static_cast<int>(arr.size()))
        throw Error("record index out of range (file has " + std::to_string(arr.size()) + ")");
      EpisodeRecord rec = EpisodeRecord::from_json(arr[static_cast<std::size_t>(rep_index)]);

      const TaskSpec* task = nullptr;
      for (const auto& t : tasks.tasks)
        if (t.seed == rec.task_seed) task = &t;
      if (!task) throw Error("no task with seed " + std::to_string(rec.task_seed) + " in file");

      std::string setting = rep_setting;
      if (j.contains("config")) setting = j["config"].value("setting", rep_setting);
      ReplayResult rr = replay(rec, scene, *task, roster_setting(setting), kb, {}, rep_ascii);
      if (rep_ascii) {
        for (std::size_t f = 0; f < rr.frames.size(); ++f)
          std::cout << "--- round " << (f + 1) << " ---\n" << rr.frames[f];
      }
      std::cout << "replay OK: " << rec.trajectory.size() << " actions over " << rec.len
                << " rounds; final scene hash " << rr.final_scene.hash() << "\n";
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

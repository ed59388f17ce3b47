#pragma once

// Behavior cloning with multi-head linear classifiers over state features.
// Head arities: task-kind 2, object-type K_pick, receptacle-type K_recep,
// room-type 4, dx 9, dy 9, drot 4, ope 4, stop 2. Class 0 decodes to
// Explore / dx=-4 / dy=-4 / drot=0 / PickUp / stop=0; argmax ties resolve to
// the lowest class index.
//
// Losses follow the composite cross-entropy structure:
//   L_subtask = L_task + gamma1 L_obj + delta1 L_rec2 + theta1 L_room2
//   L_subgoal = L_x + L_y + gamma2 L_rot + delta2 L_ope + theta2 L_stop
//   L_det     = alpha L_mis + beta L_rec1 + lambda L_room1
// with Explore-labeled samples masking the three Place-parameter heads and
// the multi-label terms summed (not averaged) over classes.

#include <cmath>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "tidysim/linalg.hpp"
#include "tidysim/taskgen.hpp"

namespace tidysim {

struct TrainConfig {
  double lr = 0.05;
  int epochs = 40;
  int batch = 16;
  std::uint64_t seed = 0;
  // Loss weights, all defaulting to 1.
  double alpha = 1, beta = 1, lambda = 1;
  double gamma1 = 1, gamma2 = 1;
  double delta1 = 1, delta2 = 1;
  double theta1 = 1, theta2 = 1;
};

// ---------------------------------------------------------------------------
// Losses over explicit distributions (the formula-level contract)
// ---------------------------------------------------------------------------

inline double cross_entropy(const Vec& probs, int label) {
  if (label < 0 || label >= static_cast<int>(probs.size()))
    throw TrainingError("label " + std::to_string(label) + " outside head arity " +
                        std::to_string(probs.size()));
  double p = probs[static_cast<std::size_t>(label)];
  return -std::log(std::max(p, 1e-300));
}

struct SubgoalDists {
  Vec dx, dy, drot, ope, stop;  // normalized distributions
};
struct SubgoalLabels {
  int dx = 0, dy = 0, drot = 0, ope = 0, stop = 0;  // class indices
};

inline double composite_subgoal_loss(const SubgoalDists& d, const SubgoalLabels& l,
                                     const TrainConfig& w = {}) {
  return cross_entropy(d.dx, l.dx) + cross_entropy(d.dy, l.dy) +
         w.gamma2 * cross_entropy(d.drot, l.drot) + w.delta2 * cross_entropy(d.ope, l.ope) +
         w.theta2 * cross_entropy(d.stop, l.stop);
}

struct SubtaskDists {
  Vec kind, object, receptacle, room;
};
struct SubtaskLabels {
  int kind = 0;  // 0 Explore, 1 Place
  int object = -1, receptacle = -1, room = -1;  // masked (-1) on Explore
};

inline double composite_subtask_loss(const SubtaskDists& d, const SubtaskLabels& l,
                                     const TrainConfig& w = {}) {
  double loss = cross_entropy(d.kind, l.kind);
  if (l.kind == 1) {  // Place: parameter heads are supervised
    loss += w.gamma1 * cross_entropy(d.object, l.object);
    loss += w.delta1 * cross_entropy(d.receptacle, l.receptacle);
    loss += w.theta1 * cross_entropy(d.room, l.room);
  }
  return loss;
}

struct DetectorDists {
  Vec mis;          // 2-class distribution
  Vec rec1, room1;  // per-class independent probabilities (multi-label)
};
struct DetectorLabels {
  int mis = 0;
  std::vector<int> rec1, room1;  // multi-hot
};

// Multi-label terms are sums of per-class binary cross-entropies.
inline double detector_loss(const DetectorDists& d, const DetectorLabels& l,
                            const TrainConfig& w = {}) {
  if (d.rec1.size() != l.rec1.size() || d.room1.size() != l.room1.size())
    throw TrainingError("detector_loss: shape mismatch");
  auto bce_sum = [](const Vec& p, const std::vector<int>& y) {
    double acc = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
      double pi = std::min(std::max(p[i], 1e-300), 1.0 - 1e-15);
      acc += y[i] ? -std::log(pi) : -std::log(1.0 - pi);
    }
    return acc;
  };
  return w.alpha * cross_entropy(d.mis, l.mis) + w.beta * bce_sum(d.rec1, l.rec1) +
         w.lambda * bce_sum(d.room1, l.room1);
}

// ---------------------------------------------------------------------------
// Linear heads
// ---------------------------------------------------------------------------

struct Head {
  Mat W;  // arity x d_in
  Vec b;
};

inline const std::vector<std::string> kTaskHeads = {"kind", "object", "receptacle", "room"};
inline const std::vector<std::string> kGoalHeads = {"dx", "dy", "drot", "ope", "stop"};

struct LinearHeads {
  int d_in_task = 0;  // sf
  int d_in_goal = 0;  // sf ++ subtask embedding
  std::map<std::string, Head> heads;

  static LinearHeads make(const Ontology& kb, int d_sf, int d_emb) {
    LinearHeads m;
    m.d_in_task = d_sf;
    m.d_in_goal = d_sf + d_emb;
    auto add = [&](const std::string& name, int arity, int d_in) {
      m.heads[name] = Head{Mat(static_cast<std::size_t>(arity), static_cast<std::size_t>(d_in)),
                           Vec(static_cast<std::size_t>(arity), 0.0)};
    };
    add("kind", 2, d_sf);
    add("object", kb.k_pick(), d_sf);
    add("receptacle", kb.k_recep(), d_sf);
    add("room", 4, d_sf);
    add("dx", 9, m.d_in_goal);
    add("dy", 9, m.d_in_goal);
    add("drot", 4, m.d_in_goal);
    add("ope", 4, m.d_in_goal);
    add("stop", 2, m.d_in_goal);
    return m;
  }

  Vec head_probs(const std::string& name, const Vec& x) const {
    const Head& h = heads.at(name);
    Vec z = matvec(h.W, x);
    for (std::size_t i = 0; i < z.size(); ++i) z[i] += h.b[i];
    return softmax(z);
  }
};

// Class mappings.
inline int encode_dx(int dx) { return dx + 4; }
inline int decode_dx(int cls) { return cls - 4; }
inline int encode_drot(int drot) { return norm_rot(drot) / 90; }
inline int decode_drot(int cls) { return 90 * cls; }
inline int encode_ope(Ope o) { return static_cast<int>(o); }
inline Ope decode_ope(int cls) { return static_cast<Ope>(cls); }

inline int argmax(const Vec& v) {
  int best = 0;
  for (int i = 1; i < static_cast<int>(v.size()); ++i)
    if (v[static_cast<std::size_t>(i)] > v[static_cast<std::size_t>(best)]) best = i;
  return best;  // ties keep the lowest index
}

struct HeadPrediction {
  SubGoal subgoal;
  int kind = 0;
  int object = 0, receptacle = 0, room = 0;
  SubgoalDists goal_dists;
  SubtaskDists task_dists;
};

inline HeadPrediction predict_heads(const LinearHeads& m, const Vec& sf, const Vec& emb) {
  if (static_cast<int>(sf.size()) != m.d_in_task)
    throw TrainingError("predict_heads: feature dimension mismatch");
  Vec goal_in = sf;
  goal_in.insert(goal_in.end(), emb.begin(), emb.end());
  if (static_cast<int>(goal_in.size()) != m.d_in_goal)
    throw TrainingError("predict_heads: embedding dimension mismatch");

  HeadPrediction p;
  p.task_dists.kind = m.head_probs("kind", sf);
  p.task_dists.object = m.head_probs("object", sf);
  p.task_dists.receptacle = m.head_probs("receptacle", sf);
  p.task_dists.room = m.head_probs("room", sf);
  p.goal_dists.dx = m.head_probs("dx", goal_in);
  p.goal_dists.dy = m.head_probs("dy", goal_in);
  p.goal_dists.drot = m.head_probs("drot", goal_in);
  p.goal_dists.ope = m.head_probs("ope", goal_in);
  p.goal_dists.stop = m.head_probs("stop", goal_in);

  p.kind = argmax(p.task_dists.kind);
  p.object = argmax(p.task_dists.object);
  p.receptacle = argmax(p.task_dists.receptacle);
  p.room = argmax(p.task_dists.room);
  p.subgoal.dx = decode_dx(argmax(p.goal_dists.dx));
  p.subgoal.dy = decode_dx(argmax(p.goal_dists.dy));
  p.subgoal.drot = decode_drot(argmax(p.goal_dists.drot));
  p.subgoal.ope = decode_ope(argmax(p.goal_dists.ope));
  p.subgoal.stop = argmax(p.goal_dists.stop) == 1;
  return p;
}

// ---------------------------------------------------------------------------
// Training
// ---------------------------------------------------------------------------

struct TrainingSample {
  Vec sf;
  Vec emb;
  SubtaskLabels task;
  SubgoalLabels goal;
};

inline TrainingSample sample_from_record(const AgentRoundRecord& rec, const Ontology& kb) {
  TrainingSample s;
  s.sf = rec.sf.v;
  s.emb = rec.emb;
  s.task.kind = rec.subtask.is_place() ? 1 : 0;
  if (rec.subtask.is_place()) {
    s.task.object = kb.pickupable_index(rec.subtask.o_type);
    s.task.receptacle = kb.receptacle_index(rec.subtask.p_type);
    s.task.room = Ontology::room_index(rec.subtask.r_type);
  }
  s.goal.dx = encode_dx(rec.subgoal.dx);
  s.goal.dy = encode_dx(rec.subgoal.dy);
  s.goal.drot = encode_drot(rec.subgoal.drot);
  s.goal.ope = encode_ope(rec.subgoal.ope);
  s.goal.stop = rec.subgoal.stop ? 1 : 0;
  return s;
}

namespace detail {

// Softmax cross-entropy gradient for one weighted head term; returns the
// term's loss contribution and accumulates dW/db into `grad`.
inline double head_term(const LinearHeads& m, const std::string& name, const Vec& x, int label,
                        double weight, std::map<std::string, Head>* grad) {
  Vec p = m.head_probs(name, x);
  double loss = weight * cross_entropy(p, label);
  if (grad) {
    Head& g = (*grad)[name];
    const Head& h = m.heads.at(name);
    if (g.W.rows == 0) g = Head{Mat(h.W.rows, h.W.cols), Vec(h.b.size(), 0.0)};
    for (std::size_t c = 0; c < p.size(); ++c) {
      double dz = weight * (p[c] - (static_cast<int>(c) == label ? 1.0 : 0.0));
      g.b[c] += dz;
      for (std::size_t k = 0; k < x.size(); ++k) g.W(c, k) += dz * x[k];
    }
  }
  return loss;
}

}  // namespace detail

// Loss (and gradients, if requested) of one sample under the composite
// losses. Exposed for the finite-difference gradient check.
inline double sample_loss(const LinearHeads& m, const TrainingSample& s, const TrainConfig& cfg,
                          std::map<std::string, Head>* grad = nullptr) {
  Vec goal_in = s.sf;
  goal_in.insert(goal_in.end(), s.emb.begin(), s.emb.end());
  double loss = 0.0;
  loss += detail::head_term(m, "kind", s.sf, s.task.kind, 1.0, grad);
  if (s.task.kind == 1) {
    loss += detail::head_term(m, "object", s.sf, s.task.object, cfg.gamma1, grad);
    loss += detail::head_term(m, "receptacle", s.sf, s.task.receptacle, cfg.delta1, grad);
    loss += detail::head_term(m, "room", s.sf, s.task.room, cfg.theta1, grad);
  }
  loss += detail::head_term(m, "dx", goal_in, s.goal.dx, 1.0, grad);
  loss += detail::head_term(m, "dy", goal_in, s.goal.dy, 1.0, grad);
  loss += detail::head_term(m, "drot", goal_in, s.goal.drot, cfg.gamma2, grad);
  loss += detail::head_term(m, "ope", goal_in, s.goal.ope, cfg.delta2, grad);
  loss += detail::head_term(m, "stop", goal_in, s.goal.stop, cfg.theta2, grad);
  return loss;
}

struct ImitationModel {
  int d_sf = 0;
  int d_emb = 0;
  Vec feat_mean;   // per input dim of (sf ++ emb), shared across agents
  Vec feat_scale;  // max(stddev, 1e-6)
  std::vector<LinearHeads> per_agent;  // indexed by roster slot
  std::vector<double> loss_trace;      // mean sample loss per epoch (all agents)

  // Standardized copy of a raw feature vector.
  Vec normalize(const Vec& x) const {
    Vec out(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = (x[i] - feat_mean[i]) / feat_scale[i];
    return out;
  }

  // Heads are trained on standardized features; raw inputs go through here.
  HeadPrediction predict(std::size_t agent, const Vec& sf, const Vec& emb) const {
    Vec x = sf;
    x.insert(x.end(), emb.begin(), emb.end());
    Vec n = normalize(x);
    Vec sf_n(n.begin(), n.begin() + d_sf);
    Vec emb_n(n.begin() + d_sf, n.end());
    return predict_heads(per_agent[agent % per_agent.size()], sf_n, emb_n);
  }

  nlohmann::json to_json() const {
    nlohmann::json j;
    j["schema_version"] = 1;
    j["d_sf"] = d_sf;
    j["d_emb"] = d_emb;
    j["feat_mean"] = feat_mean;
    j["feat_scale"] = feat_scale;
    j["loss_trace"] = loss_trace;
    j["agents"] = nlohmann::json::array();
    for (const auto& m : per_agent) {
      nlohmann::json jm;
      jm["d_in_task"] = m.d_in_task;
      jm["d_in_goal"] = m.d_in_goal;
      for (const auto& [name, h] : m.heads)
        jm["heads"][name] = {{"rows", h.W.rows}, {"cols", h.W.cols}, {"w", h.W.a}, {"b", h.b}};
      j["agents"].push_back(jm);
    }
    return j;
  }

  static ImitationModel from_json(const nlohmann::json& j) {
    ImitationModel model;
    model.d_sf = j.at("d_sf").get<int>();
    model.d_emb = j.at("d_emb").get<int>();
    model.feat_mean = j.at("feat_mean").get<Vec>();
    model.feat_scale = j.at("feat_scale").get<Vec>();
    model.loss_trace = j.at("loss_trace").get<std::vector<double>>();
    for (const auto& jm : j.at("agents")) {
      LinearHeads m;
      m.d_in_task = jm.at("d_in_task").get<int>();
      m.d_in_goal = jm.at("d_in_goal").get<int>();
      for (const auto& [name, jh] : jm.at("heads").items()) {
        Head h;
        h.W = Mat(jh.at("rows").get<std::size_t>(), jh.at("cols").get<std::size_t>());
        h.W.a = jh.at("w").get<std::vector<double>>();
        h.b = jh.at("b").get<Vec>();
        m.heads[name] = std::move(h);
      }
      model.per_agent.push_back(std::move(m));
    }
    return model;
  }

  void save(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw Error("model: cannot write '" + path + "'");
    out << to_json().dump(2) << "\n";
  }

  static ImitationModel load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("model: cannot open '" + path + "'");
    nlohmann::json j;
    in >> j;
    return from_json(j);
  }
};

// Mini-batch SGD on the composite losses. Heads are per roster slot and do
// not share weights.
inline ImitationModel train_imitation(const std::vector<Demonstration>& demos, const Ontology& kb,
                                      const TrainConfig& cfg = {}) {
  if (demos.empty()) throw TrainingError("no demonstrations");
  std::size_t n_agents = demos[0].roster.size();
  for (const auto& d : demos)
    if (d.roster.size() != n_agents) throw TrainingError("mixed roster sizes across demonstrations");

  int d_sf = -1, d_emb = -1;
  std::vector<std::vector<TrainingSample>> samples(n_agents);
  for (const auto& demo : demos) {
    for (const auto& round : demo.rounds) {
      for (std::size_t i = 0; i < round.agents.size() && i < n_agents; ++i) {
        const auto& rec = round.agents[i];
        if (rec.sf.v.empty()) continue;  // stopped agents record nothing
        if (d_sf < 0) d_sf = static_cast<int>(rec.sf.v.size());
        if (d_emb < 0) d_emb = static_cast<int>(rec.emb.size());
        if (static_cast<int>(rec.sf.v.size()) != d_sf ||
            static_cast<int>(rec.emb.size()) != d_emb)
          throw TrainingError("inconsistent feature dimension across demonstrations");
        samples[i].push_back(sample_from_record(rec, kb));
      }
    }
  }
  if (d_sf < 0) throw TrainingError("demonstrations contain no usable samples");

  ImitationModel model;
  model.d_sf = d_sf;
  model.d_emb = d_emb;
  model.per_agent.assign(n_agents, LinearHeads::make(kb, d_sf, d_emb));

  // Feature standardization, shared across agents and stored in the model.
  {
    const std::size_t dim = static_cast<std::size_t>(d_sf + d_emb);
    Vec mean(dim, 0.0), var(dim, 0.0);
    std::size_t count = 0;
    for (const auto& per_agent : samples)
      for (const auto& s : per_agent) {
        for (std::size_t k = 0; k < dim; ++k) {
          double x = k < static_cast<std::size_t>(d_sf) ? s.sf[k]
                                                        : s.emb[k - static_cast<std::size_t>(d_sf)];
          mean[k] += x;
        }
        ++count;
      }
    for (auto& m : mean) m /= static_cast<double>(count);
    for (const auto& per_agent : samples)
      for (const auto& s : per_agent)
        for (std::size_t k = 0; k < dim; ++k) {
          double x = k < static_cast<std::size_t>(d_sf) ? s.sf[k]
                                                        : s.emb[k - static_cast<std::size_t>(d_sf)];
          var[k] += (x - mean[k]) * (x - mean[k]);
        }
    model.feat_mean = mean;
    model.feat_scale.resize(dim);
    for (std::size_t k = 0; k < dim; ++k)
      model.feat_scale[k] = std::max(std::sqrt(var[k] / static_cast<double>(count)), 1e-6);
  }
  // Train on standardized copies.
  for (auto& per_agent : samples)
    for (auto& s : per_agent) {
      Vec x = s.sf;
      x.insert(x.end(), s.emb.begin(), s.emb.end());
      Vec n = model.normalize(x);
      s.sf.assign(n.begin(), n.begin() + d_sf);
      s.emb.assign(n.begin() + d_sf, n.end());
    }

  Rng rng(cfg.seed);
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    double total = 0.0;
    std::size_t count = 0;
    for (std::size_t agent = 0; agent < n_agents; ++agent) {
      auto& data = samples[agent];
      if (data.empty()) continue;
      LinearHeads& m = model.per_agent[agent];

      std::vector<std::size_t> order(data.size());
      for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
      for (std::size_t i = order.size(); i > 1; --i)
        std::swap(order[i - 1], order[uniform_index(rng, i)]);

      for (std::size_t begin = 0; begin < order.size(); begin += static_cast<std::size_t>(cfg.batch)) {
        std::size_t end = std::min(order.size(), begin + static_cast<std::size_t>(cfg.batch));
        std::map<std::string, Head> grad;
        double batch_loss = 0.0;
        for (std::size_t k = begin; k < end; ++k)
          batch_loss += sample_loss(m, data[order[k]], cfg, &grad);
        if (!std::isfinite(batch_loss))
          throw TrainingError("training diverged at epoch " + std::to_string(epoch));
        double scale = cfg.lr / static_cast<double>(end - begin);
        for (auto& [name, g] : grad) {
          Head& h = m.heads.at(name);
          for (std::size_t i = 0; i < h.W.a.size(); ++i) h.W.a[i] -= scale * g.W.a[i];
          for (std::size_t i = 0; i < h.b.size(); ++i) h.b[i] -= scale * g.b[i];
        }
        total += batch_loss;
        count += end - begin;
      }
    }
    model.loss_trace.push_back(count ? total / static_cast<double>(count) : 0.0);
  }
  return model;
}

// Fraction of samples whose five decoded sub-goal fields all match the
// expert's tuple.
inline double subgoal_tuple_accuracy(const ImitationModel& model,
                                     const std::vector<Demonstration>& demos) {
  std::size_t hits = 0, total = 0;
  for (const auto& demo : demos) {
    for (const auto& round : demo.rounds) {
      for (std::size_t i = 0; i < round.agents.size() && i < model.per_agent.size(); ++i) {
        const auto& rec = round.agents[i];
        if (rec.sf.v.empty()) continue;
        HeadPrediction p = model.predict(i, rec.sf.v, rec.emb);
        ++total;
        if (p.subgoal == rec.subgoal) ++hits;
      }
    }
  }
  return total == 0 ? 0.0 : static_cast<double>(hits) / static_cast<double>(total);
}

}  // namespace tidysim

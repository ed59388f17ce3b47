#pragma once

// Handshake-based group communication (HanGrCom) and the baseline protocols.
//
// Per communication round each agent derives a state feature sf, generator
// matrices produce [qry, key, val, inv], and the attention matrix is
//   raw[i][j] = dot(qry_j, key_i) / sqrt(d),   T = row-wise softmax(raw),
// where T[i][j] scores the effectiveness of information sent from agent j to
// agent i. Thresholds: an agent is receptive when T[i][i] < delta; it may
// receive from j when T[i][j] > mu. Groups are connected components of the
// resulting handshake graph.
//
// Bandwidth accounting is receiver-side: the ledger credits every dimension
// an agent receives. Payload sizes: state = 10 (va 3 + pose 3 + sub-task 4),
// map = 400 (20x20 embedding), compressed map = 100, vectors = d.

#include <algorithm>
#include <array>
#include <string>
#include <vector>

#include "tidysim/linalg.hpp"
#include "tidysim/rng.hpp"
#include "tidysim/scene.hpp"

namespace tidysim {

// ---------------------------------------------------------------------------
// State feature
// ---------------------------------------------------------------------------

// Layout (core 15 dims, zero-padded to the configured d_sf):
//   [0..2]   va: nav, mani, hei
//   [3..5]   pose: x, y, rot/90
//   [6..9]   fd: new-detection flag, newest detection type index, det flag,
//            staleness counter (rounds since last new detection)
//   [10..12] fp: target receptacle type index, target room index, target-known
//   [13..14] frontier: distance to nearest frontier, unexplored fraction
inline constexpr int kSfVa = 0;
inline constexpr int kSfPose = 3;
inline constexpr int kSfFd = 6;
inline constexpr int kSfFp = 10;
inline constexpr int kSfFrontier = 13;
inline constexpr int kSfCore = 15;

struct StateFeature {
  Vec v;
  double operator[](int i) const { return v[static_cast<std::size_t>(i)]; }
};

// Runtime composite of everything featurize_state reads.
struct FeatureInputs {
  CapabilityVector cap;
  Pose pose;
  bool new_detection = false;
  int newest_type_index = -1;  // pickupable-type index of the newest detection
  int newest_det = 0;
  int staleness = 0;
  int target_recep_index = -1;
  int target_room_index = -1;
  bool target_known = false;
  double frontier_distance = -1.0;
  double unexplored_fraction = 0.0;
};

inline StateFeature featurize_state(const FeatureInputs& in, int d_sf = 24) {
  if (d_sf < kSfCore) throw Error("featurize_state: d_sf must be >= 15");
  Vec v(static_cast<std::size_t>(d_sf), 0.0);
  v[kSfVa + 0] = in.cap.nav;
  v[kSfVa + 1] = in.cap.mani;
  v[kSfVa + 2] = in.cap.hei;
  v[kSfPose + 0] = in.pose.x;
  v[kSfPose + 1] = in.pose.y;
  v[kSfPose + 2] = norm_rot(in.pose.rot) / 90;
  v[kSfFd + 0] = in.new_detection ? 1.0 : 0.0;
  v[kSfFd + 1] = in.newest_type_index;
  v[kSfFd + 2] = in.newest_det;
  v[kSfFd + 3] = in.staleness;
  v[kSfFp + 0] = in.target_recep_index;
  v[kSfFp + 1] = in.target_room_index;
  v[kSfFp + 2] = in.target_known ? 1.0 : 0.0;
  v[kSfFrontier + 0] = in.frontier_distance;
  v[kSfFrontier + 1] = in.unexplored_fraction;
  return {std::move(v)};
}

// ---------------------------------------------------------------------------
// Vector generators
// ---------------------------------------------------------------------------

struct GeneratorSet {
  Mat q, k, v, e;  // each d x d_sf
};

struct CommConfig {
  int d = 16;
  int d_sf = 24;
  double mu = 0.2;
  double delta = 0.8;
  std::string generator_preset = "semantic";  // "semantic" | "random"
  std::uint64_t generator_seed = 17;
  int state_dims = 10;
  int map_dims = 400;
  int map_dims_compressed = 100;
};

// "semantic" preset: qry advertises what the sender has (fresh detections),
// key encodes what the receiver needs (manipulation capability, stale info),
// so agents with fresh detections score as useful senders and mani-capable
// agents as needy receivers. val carries the leading sf slice, inv carries
// pose + prediction fields.
inline GeneratorSet make_generators(const CommConfig& cfg) {
  const auto d = static_cast<std::size_t>(cfg.d);
  const auto dsf = static_cast<std::size_t>(cfg.d_sf);
  if (cfg.generator_preset == "random") {
    Rng rng(cfg.generator_seed);
    GeneratorSet g;
    g.q = random_orthonormalish(rng, d, dsf);
    g.k = random_orthonormalish(rng, d, dsf);
    g.v = random_orthonormalish(rng, d, dsf);
    g.e = random_orthonormalish(rng, d, dsf);
    return g;
  }
  if (cfg.generator_preset != "semantic")
    throw Error("unknown generator preset '" + cfg.generator_preset + "'");
  GeneratorSet g;
  g.q = Mat(d, dsf);
  g.q(0, kSfFd + 0) = 3.0;   // new detection this round
  g.q(0, kSfFd + 2) = 1.0;   // newest det flag
  g.q(0, kSfFd + 3) = -0.1;  // stale senders fade
  g.q(1, kSfVa + 2) = -0.5;  // low agents advertise ground coverage
  g.q(1, kSfFrontier + 1) = 0.5;
  g.k = Mat(d, dsf);
  g.k(0, kSfVa + 1) = 2.0;   // mani agents want detections
  g.k(0, kSfFd + 3) = 0.05;  // the staler my own info, the needier I am
  g.k(1, kSfVa + 1) = 0.5;
  g.v = Mat(d, dsf);
  for (std::size_t r = 0; r < d && r < dsf; ++r) g.v(r, r) = 1.0;  // leading slice
  g.e = Mat(d, dsf);
  for (std::size_t r = 0; r < 3; ++r) g.e(r, static_cast<std::size_t>(kSfPose) + r) = 1.0;
  for (std::size_t r = 0; r < 3; ++r) g.e(3 + r, static_cast<std::size_t>(kSfFp) + r) = 1.0;
  return g;
}

struct CommVectors {
  Vec qry, key, val, inv;
};

// [qry, key, val, inv] = [theta_q, theta_k, theta_v, theta_e](sf); plain
// matrix-vector products, no nonlinearity.
inline CommVectors make_vectors(const StateFeature& sf, const GeneratorSet& gens) {
  CommVectors out;
  out.qry = matvec(gens.q, sf.v);
  out.key = matvec(gens.k, sf.v);
  out.val = matvec(gens.v, sf.v);
  out.inv = matvec(gens.e, sf.v);
  return out;
}

// ---------------------------------------------------------------------------
// Attention matrix and groups
// ---------------------------------------------------------------------------

struct CommMatrix {
  int n = 0;
  Mat raw;  // pre-softmax scores
  Mat T;    // row-stochastic
};

inline Mat row_softmax(const Mat& raw) {
  Mat T(raw.rows, raw.cols);
  for (std::size_t i = 0; i < raw.rows; ++i) {
    Vec row(raw.cols);
    for (std::size_t j = 0; j < raw.cols; ++j) row[j] = raw(i, j);
    Vec p = softmax(row);
    for (std::size_t j = 0; j < raw.cols; ++j) T(i, j) = p[j];
  }
  return T;
}

inline CommMatrix attention_matrix(const std::vector<CommVectors>& vecs) {
  const std::size_t n = vecs.size();
  if (n == 0) throw Error("attention_matrix: need at least one agent");
  const std::size_t d = vecs[0].qry.size();
  for (const auto& v : vecs) {
    if (v.qry.size() != d || v.key.size() != d) throw Error("attention_matrix: mixed dimensions");
    if (!all_finite(v.qry) || !all_finite(v.key))
      throw Error("attention_matrix: non-finite input");
  }
  CommMatrix m;
  m.n = static_cast<int>(n);
  m.raw = Mat(n, n);
  const double scale = 1.0 / std::sqrt(static_cast<double>(d));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) m.raw(i, j) = dot(vecs[j].qry, vecs[i].key) * scale;
  m.T = row_softmax(m.raw);
  return m;
}

struct Partition {
  std::vector<int> group_of;            // agent -> group index
  std::vector<std::vector<int>> groups;  // sorted members, ordered by least member
};

// Handshake grouping. Vertices: receptive agents (T[i][i] < delta) plus
// senders above mu toward some receptive agent. Edges {i,j} when either
// direction clears mu. Groups are connected components; excluded or isolated
// agents are singletons.
inline Partition partition_groups(const CommMatrix& m, double delta, double mu) {
  if (!(0.0 < mu && mu < delta && delta < 1.0))
    throw Error("partition_groups: need 0 < mu < delta < 1");
  const int n = m.n;
  std::vector<bool> receptive(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i)
    receptive[static_cast<std::size_t>(i)] =
        m.T(static_cast<std::size_t>(i), static_cast<std::size_t>(i)) < delta;

  std::vector<bool> vertex(static_cast<std::size_t>(n), false);
  for (int i = 0; i < n; ++i) {
    if (!receptive[static_cast<std::size_t>(i)]) continue;
    vertex[static_cast<std::size_t>(i)] = true;
    for (int j = 0; j < n; ++j)
      if (j != i && m.T(static_cast<std::size_t>(i), static_cast<std::size_t>(j)) > mu)
        vertex[static_cast<std::size_t>(j)] = true;  // sender to a receptive agent
  }

  // Union-find over retained vertices.
  std::vector<int> parent(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) parent[static_cast<std::size_t>(i)] = i;
  auto find = [&](int x) {
    while (parent[static_cast<std::size_t>(x)] != x) x = parent[static_cast<std::size_t>(x)];
    return x;
  };
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) {
      if (!vertex[static_cast<std::size_t>(i)] || !vertex[static_cast<std::size_t>(j)]) continue;
      if (m.T(static_cast<std::size_t>(i), static_cast<std::size_t>(j)) > mu ||
          m.T(static_cast<std::size_t>(j), static_cast<std::size_t>(i)) > mu)
        parent[static_cast<std::size_t>(find(j))] = find(i);
    }

  Partition p;
  p.group_of.assign(static_cast<std::size_t>(n), -1);
  for (int i = 0; i < n; ++i) {
    int root = find(i);
    if (p.group_of[static_cast<std::size_t>(root)] < 0) {
      p.group_of[static_cast<std::size_t>(root)] = static_cast<int>(p.groups.size());
      p.groups.push_back({});
    }
    p.group_of[static_cast<std::size_t>(i)] = p.group_of[static_cast<std::size_t>(root)];
    p.groups[static_cast<std::size_t>(p.group_of[static_cast<std::size_t>(i)])].push_back(i);
  }
  for (auto& g : p.groups) std::sort(g.begin(), g.end());
  return p;
}

// inn_i = sum over j != i with T[i][j] > mu of T[i][j] * val_j.
inline Vec aggregate_intra(const CommMatrix& m, const std::vector<Vec>& vals, double mu, int i) {
  const std::size_t d = vals.empty() ? 0 : vals[0].size();
  Vec out(d, 0.0);
  for (int j = 0; j < m.n; ++j) {
    if (j == i) continue;
    double att = m.T(static_cast<std::size_t>(i), static_cast<std::size_t>(j));
    if (att > mu) axpy(att, vals[static_cast<std::size_t>(j)], out);
  }
  return out;
}

struct InterResult {
  Vec v;
  int sender = -1;  // -1 when no other group exists
};

// int_i = inv_j for j = argmax over agents outside i's group of the mean of
// T[g][j] over g in i's group; ties go to the lowest index.
inline InterResult aggregate_inter(const CommMatrix& m, const std::vector<Vec>& invs,
                                   const Partition& p, int i) {
  const std::size_t d = invs.empty() ? 0 : invs[0].size();
  InterResult out;
  out.v.assign(d, 0.0);
  const auto& mine = p.groups[static_cast<std::size_t>(p.group_of[static_cast<std::size_t>(i)])];
  int best = -1;
  double best_score = 0.0;
  for (int j = 0; j < m.n; ++j) {
    if (p.group_of[static_cast<std::size_t>(j)] == p.group_of[static_cast<std::size_t>(i)]) continue;
    double sum = 0.0;
    for (int g : mine) sum += m.T(static_cast<std::size_t>(g), static_cast<std::size_t>(j));
    double score = sum / static_cast<double>(mine.size());
    if (best < 0 || score > best_score) {  // strict: ties keep the lowest j
      best = j;
      best_score = score;
    }
  }
  if (best >= 0) {
    out.v = invs[static_cast<std::size_t>(best)];
    out.sender = best;
  }
  return out;
}

// Differentiable training mode: full sums, no thresholds, includes j = i.
//   inn_i = sum_j T[i][j] val_j,   int_i = sum_j (1 - T[i][j]) inv_j.
inline std::pair<Vec, Vec> soft_aggregate(const CommMatrix& m, const std::vector<Vec>& vals,
                                          const std::vector<Vec>& invs, int i) {
  const std::size_t d = vals.empty() ? 0 : vals[0].size();
  Vec inn(d, 0.0), inter(d, 0.0);
  for (int j = 0; j < m.n; ++j) {
    double att = m.T(static_cast<std::size_t>(i), static_cast<std::size_t>(j));
    axpy(att, vals[static_cast<std::size_t>(j)], inn);
    axpy(1.0 - att, invs[static_cast<std::size_t>(j)], inter);
  }
  return {inn, inter};
}

// ---------------------------------------------------------------------------
// Protocols and the bandwidth ledger
// ---------------------------------------------------------------------------

enum class Protocol { HanGrCom, CondComm, CmprComm, IntenComm, BroadComm, CentralComm, NoComm };

inline std::string to_string(Protocol p) {
  switch (p) {
    case Protocol::HanGrCom: return "HanGrCom";
    case Protocol::CondComm: return "CondComm";
    case Protocol::CmprComm: return "CmprComm";
    case Protocol::IntenComm: return "IntenComm";
    case Protocol::BroadComm: return "BroadComm";
    case Protocol::CentralComm: return "CentralComm";
    case Protocol::NoComm: return "NoComm";
  }
  return "?";
}

inline Protocol protocol_from_string(const std::string& s) {
  for (Protocol p : {Protocol::HanGrCom, Protocol::CondComm, Protocol::CmprComm,
                     Protocol::IntenComm, Protocol::BroadComm, Protocol::CentralComm,
                     Protocol::NoComm})
    if (to_string(p) == s) return p;
  throw LookupError("unknown protocol '" + s + "'");
}

enum class PayloadKind { State, Map, MapCompressed, Query, Value, Inter };

inline std::string to_string(PayloadKind k) {
  switch (k) {
    case PayloadKind::State: return "state";
    case PayloadKind::Map: return "map";
    case PayloadKind::MapCompressed: return "map_compressed";
    case PayloadKind::Query: return "query";
    case PayloadKind::Value: return "value";
    case PayloadKind::Inter: return "inter";
  }
  return "?";
}

inline int payload_dims(PayloadKind k, const CommConfig& cfg) {
  switch (k) {
    case PayloadKind::State: return cfg.state_dims;
    case PayloadKind::Map: return cfg.map_dims;
    case PayloadKind::MapCompressed: return cfg.map_dims_compressed;
    case PayloadKind::Query:
    case PayloadKind::Value:
    case PayloadKind::Inter: return cfg.d;
  }
  return 0;
}

struct CommMessage {
  int round = 0;
  int sender = -1;
  int receiver = -1;
  PayloadKind kind = PayloadKind::State;
  int dims = 0;
};

struct CommLedger {
  std::vector<CommMessage> messages;
  long long total_dims = 0;

  void credit(int round, int sender, int receiver, PayloadKind kind, const CommConfig& cfg) {
    int dims = payload_dims(kind, cfg);
    messages.push_back(CommMessage{round, sender, receiver, kind, dims});
    total_dims += dims;
  }
};

struct ProtocolInput {
  StateFeature sf;
  CommVectors vecs;           // HanGrCom
  bool new_detection = false;  // CondComm trigger
};

// What an agent functionally receives in one round. Vector payloads carry
// the shared knowledge: a sender in state_from shares capability, pose and
// current sub-task; map_from additionally shares its accumulated semantic
// map and detection pool; cmpr_map_from shares instances/detections but not
// explored area.
struct Inbox {
  std::vector<int> state_from;
  std::vector<int> map_from;
  std::vector<int> cmpr_map_from;
  bool receptive = false;  // HanGrCom
  Vec inn;
  Vec inter;
  int inter_sender = -1;
  bool central = false;  // sub-task assignments come from the virtual center
};

struct ProtocolResult {
  std::vector<Inbox> inboxes;
  CommMatrix T;       // HanGrCom only
  Partition groups;   // HanGrCom only
};

inline ProtocolResult run_protocol(Protocol protocol, const std::vector<ProtocolInput>& team,
                                   const CommConfig& cfg, CommLedger& ledger, int round) {
  const int n = static_cast<int>(team.size());
  ProtocolResult res;
  res.inboxes.assign(static_cast<std::size_t>(n), Inbox{});

  auto all_pairs = [&](PayloadKind a, PayloadKind b, auto&& record) {
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        if (i == j) continue;
        ledger.credit(round, j, i, a, cfg);
        ledger.credit(round, j, i, b, cfg);
        record(i, j);
      }
  };

  switch (protocol) {
    case Protocol::NoComm:
      return res;

    case Protocol::BroadComm:
      all_pairs(PayloadKind::State, PayloadKind::Map, [&](int i, int j) {
        res.inboxes[static_cast<std::size_t>(i)].state_from.push_back(j);
        res.inboxes[static_cast<std::size_t>(i)].map_from.push_back(j);
      });
      return res;

    case Protocol::CentralComm:
      // The virtual center relays every sender's payload to the other N-1
      // agents; the returned assignments ride along dimension-free.
      all_pairs(PayloadKind::State, PayloadKind::Map, [&](int i, int j) {
        res.inboxes[static_cast<std::size_t>(i)].state_from.push_back(j);
        res.inboxes[static_cast<std::size_t>(i)].map_from.push_back(j);
      });
      for (auto& inbox : res.inboxes) inbox.central = true;
      return res;

    case Protocol::CmprComm:
      all_pairs(PayloadKind::State, PayloadKind::MapCompressed, [&](int i, int j) {
        res.inboxes[static_cast<std::size_t>(i)].state_from.push_back(j);
        res.inboxes[static_cast<std::size_t>(i)].cmpr_map_from.push_back(j);
      });
      return res;

    case Protocol::IntenComm:
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
          if (i == j) continue;
          ledger.credit(round, j, i, PayloadKind::State, cfg);
          res.inboxes[static_cast<std::size_t>(i)].state_from.push_back(j);
        }
      return res;

    case Protocol::CondComm:
      for (int j = 0; j < n; ++j) {
        if (!team[static_cast<std::size_t>(j)].new_detection) continue;
        for (int i = 0; i < n; ++i) {
          if (i == j) continue;
          ledger.credit(round, j, i, PayloadKind::State, cfg);
          ledger.credit(round, j, i, PayloadKind::Map, cfg);
          res.inboxes[static_cast<std::size_t>(i)].state_from.push_back(j);
          res.inboxes[static_cast<std::size_t>(i)].map_from.push_back(j);
        }
      }
      return res;

    case Protocol::HanGrCom: {
      std::vector<CommVectors> vecs;
      vecs.reserve(team.size());
      for (const auto& t : team) vecs.push_back(t.vecs);
      res.T = attention_matrix(vecs);
      res.groups = partition_groups(res.T, cfg.delta, cfg.mu);

      std::vector<Vec> vals, invs;
      for (const auto& v : vecs) {
        vals.push_back(v.val);
        invs.push_back(v.inv);
      }
      for (int i = 0; i < n; ++i) {
        Inbox& inbox = res.inboxes[static_cast<std::size_t>(i)];
        // Query exchange: every agent receives every other agent's qry.
        for (int j = 0; j < n; ++j)
          if (j != i) ledger.credit(round, j, i, PayloadKind::Query, cfg);

        inbox.receptive =
            res.T.T(static_cast<std::size_t>(i), static_cast<std::size_t>(i)) < cfg.delta;
        if (inbox.receptive) {
          inbox.inn = aggregate_intra(res.T, vals, cfg.mu, i);
          for (int j = 0; j < n; ++j) {
            if (j == i) continue;
            if (res.T.T(static_cast<std::size_t>(i), static_cast<std::size_t>(j)) > cfg.mu) {
              ledger.credit(round, j, i, PayloadKind::Value, cfg);
              // Group-mate val vectors realize shared state + map knowledge.
              inbox.state_from.push_back(j);
              inbox.map_from.push_back(j);
            }
          }
        } else {
          inbox.inn.assign(static_cast<std::size_t>(cfg.d), 0.0);
        }
        InterResult inter = aggregate_inter(res.T, invs, res.groups, i);
        inbox.inter = inter.v;
        inbox.inter_sender = inter.sender;
        if (inter.sender >= 0) {
          ledger.credit(round, inter.sender, i, PayloadKind::Inter, cfg);
          inbox.state_from.push_back(inter.sender);
        }
      }
      return res;
    }
  }
  throw LookupError("unknown protocol id");
}

}  // namespace tidysim

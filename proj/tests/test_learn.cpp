#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "fixtures.hpp"
#include "tidysim/learn.hpp"

using namespace tidysim;

static Vec one_hot(int n, int i) {
  Vec v(static_cast<std::size_t>(n), 0.0);
  v[static_cast<std::size_t>(i)] = 1.0;
  return v;
}

static Vec uniform_dist(int n) { return Vec(static_cast<std::size_t>(n), 1.0 / n); }

// ---------------------------------------------------------------------------
// Composite losses
// ---------------------------------------------------------------------------

TEST_CASE("perfect sub-goal predictions have zero loss") {
  SubgoalDists d{one_hot(9, 2), one_hot(9, 6), one_hot(4, 1), one_hot(4, 3), one_hot(2, 0)};
  SubgoalLabels l{2, 6, 1, 3, 0};
  CHECK(composite_subgoal_loss(d, l) == 0.0);
}

// Oracle: hand sum of logs. Uniform predictions with unit weights give
// ln9 + ln9 + ln4 + ln4 + ln2 = 7.8638...
TEST_CASE("uniform sub-goal predictions cost the sum of log arities") {
  SubgoalDists d{uniform_dist(9), uniform_dist(9), uniform_dist(4), uniform_dist(4),
                 uniform_dist(2)};
  SubgoalLabels l{0, 8, 3, 2, 1};
  double expect = 2 * std::log(9.0) + 2 * std::log(4.0) + std::log(2.0);
  CHECK(std::abs(composite_subgoal_loss(d, l) - expect) < 1e-9);
  CHECK(std::abs(expect - 7.86) < 5e-3);
}

TEST_CASE("doubling gamma2 adds exactly the rotation term") {
  SubgoalDists d{uniform_dist(9), uniform_dist(9), uniform_dist(4), uniform_dist(4),
                 uniform_dist(2)};
  SubgoalLabels l{4, 4, 0, 0, 0};
  TrainConfig w1, w2;
  w2.gamma2 = 2.0;
  double rot_term = std::log(4.0);
  CHECK(std::abs(composite_subgoal_loss(d, l, w2) - composite_subgoal_loss(d, l, w1) - rot_term) <
        1e-12);
}

TEST_CASE("sub-task loss: perfect, uniform, and Explore masking") {
  const int k_pick = 10, k_recep = 7;
  SubtaskDists perfect{one_hot(2, 1), one_hot(k_pick, 3), one_hot(k_recep, 2), one_hot(4, 1)};
  CHECK(composite_subtask_loss(perfect, SubtaskLabels{1, 3, 2, 1}) == 0.0);

  SubtaskDists uni{uniform_dist(2), uniform_dist(k_pick), uniform_dist(k_recep), uniform_dist(4)};
  double expect = std::log(2.0) + std::log(10.0) + std::log(7.0) + std::log(4.0);
  CHECK(std::abs(composite_subtask_loss(uni, SubtaskLabels{1, 0, 0, 0}) - expect) < 1e-9);

  // Explore-labeled samples mask the three Place-parameter heads.
  double explore_loss = composite_subtask_loss(uni, SubtaskLabels{0, -1, -1, -1});
  CHECK(std::abs(explore_loss - std::log(2.0)) < 1e-9);
}

TEST_CASE("label outside head arity is an error") {
  SubgoalDists d{uniform_dist(9), uniform_dist(9), uniform_dist(4), uniform_dist(4),
                 uniform_dist(2)};
  SubgoalLabels l{9, 0, 0, 0, 0};
  CHECK_THROWS_AS(composite_subgoal_loss(d, l), TrainingError);
}

TEST_CASE("detector loss: perfect and weighted-term linearity") {
  DetectorDists perfect{one_hot(2, 1), {1.0, 1e-15, 1.0}, {1e-15, 1.0, 1e-15, 1e-15}};
  DetectorLabels labels{1, {1, 0, 1}, {0, 1, 0, 0}};
  CHECK(detector_loss(perfect, labels) < 1e-9);

  DetectorDists d{uniform_dist(2), {0.3, 0.7, 0.5}, {0.25, 0.5, 0.5, 0.25}};
  TrainConfig w1, w2;
  w2.alpha = 2.0;
  double mis_term = std::log(2.0);
  CHECK(std::abs(detector_loss(d, labels, w2) - detector_loss(d, labels, w1) - mis_term) < 1e-12);
}

// Oracle: independently coded per-term sum.
TEST_CASE("detector loss matches a naive per-class loop") {
  DetectorDists d{{0.4, 0.6}, {0.3, 0.7, 0.5}, {0.25, 0.5, 0.5, 0.25}};
  DetectorLabels l{0, {1, 0, 1}, {0, 1, 1, 0}};
  TrainConfig w;
  w.alpha = 1.5;
  w.beta = 0.5;
  w.lambda = 2.0;
  double expect = w.alpha * -std::log(0.4);
  const Vec& r = d.rec1;
  expect += w.beta * (-std::log(r[0]) - std::log(1 - r[1]) - std::log(r[2]));
  const Vec& rm = d.room1;
  expect += w.lambda * (-std::log(1 - rm[0]) - std::log(rm[1]) - std::log(rm[2]) - std::log(1 - rm[3]));
  CHECK(std::abs(detector_loss(d, l, w) - expect) < 1e-12);
}

TEST_CASE("loss is zero exactly at one-hot-correct predictions and positive otherwise") {
  SubgoalDists d{one_hot(9, 2), one_hot(9, 6), one_hot(4, 1), one_hot(4, 3), one_hot(2, 0)};
  CHECK(composite_subgoal_loss(d, SubgoalLabels{2, 6, 1, 3, 0}) == 0.0);
  CHECK(composite_subgoal_loss(d, SubgoalLabels{3, 6, 1, 3, 0}) > 100.0);  // clamped -log(0)
}

// ---------------------------------------------------------------------------
// Gradient check
// ---------------------------------------------------------------------------

static TrainingSample random_sample(Rng& rng, const Ontology& kb, int d_sf) {
  TrainingSample s;
  s.sf.resize(static_cast<std::size_t>(d_sf));
  for (auto& x : s.sf) x = normal(rng);
  s.emb.resize(kSubtaskEmbDims);
  for (auto& x : s.emb) x = normal(rng);
  s.task.kind = static_cast<int>(uniform_index(rng, 2));
  if (s.task.kind == 1) {
    s.task.object = static_cast<int>(uniform_index(rng, static_cast<std::uint64_t>(kb.k_pick())));
    s.task.receptacle =
        static_cast<int>(uniform_index(rng, static_cast<std::uint64_t>(kb.k_recep())));
    s.task.room = static_cast<int>(uniform_index(rng, 4));
  }
  s.goal.dx = static_cast<int>(uniform_index(rng, 9));
  s.goal.dy = static_cast<int>(uniform_index(rng, 9));
  s.goal.drot = static_cast<int>(uniform_index(rng, 4));
  s.goal.ope = static_cast<int>(uniform_index(rng, 4));
  s.goal.stop = static_cast<int>(uniform_index(rng, 2));
  return s;
}

// Oracle: central finite differences on randomly probed weight entries.
TEST_CASE("analytic gradients match central finite differences within 1e-5 relative") {
  const Ontology& kb = fx::default_ontology();
  Rng rng(77);
  const int d_sf = 24;
  for (int fixture = 0; fixture < 20; ++fixture) {
    LinearHeads m = LinearHeads::make(kb, d_sf, kSubtaskEmbDims);
    for (auto& [name, h] : m.heads) {
      for (auto& w : h.W.a) w = 0.3 * normal(rng);
      for (auto& b : h.b) b = 0.3 * normal(rng);
    }
    TrainingSample s = random_sample(rng, kb, d_sf);
    TrainConfig cfg;

    std::map<std::string, Head> grad;
    sample_loss(m, s, cfg, &grad);

    for (const auto& name : {"kind", "dx", "ope", "stop"}) {
      Head& h = m.heads.at(name);
      for (int probe = 0; probe < 4; ++probe) {
        std::size_t idx = uniform_index(rng, h.W.a.size());
        const double eps = 1e-5;  // balances truncation vs rounding error
        double saved = h.W.a[idx];
        h.W.a[idx] = saved + eps;
        double up = sample_loss(m, s, cfg);
        h.W.a[idx] = saved - eps;
        double down = sample_loss(m, s, cfg);
        h.W.a[idx] = saved;
        double numeric = (up - down) / (2 * eps);
        double analytic = grad.at(name).W.a[idx];
        double denom = std::max({std::abs(numeric), std::abs(analytic), 1e-3});  // floor: fd noise is absolute
        CHECK(std::abs(numeric - analytic) / denom < 1e-5);
      }
    }
  }
}

TEST_CASE("loss is affine in each weight holding predictions fixed") {
  const Ontology& kb = fx::default_ontology();
  Rng rng(5);
  LinearHeads m = LinearHeads::make(kb, 24, kSubtaskEmbDims);
  for (auto& [name, h] : m.heads)
    for (auto& w : h.W.a) w = 0.2 * normal(rng);
  TrainingSample s = random_sample(rng, kb, 24);

  for (double* weight : {nullptr}) (void)weight;  // structure below instead
  TrainConfig base;
  double l1 = sample_loss(m, s, base);
  TrainConfig twice = base;
  twice.gamma2 = 2.0;
  TrainConfig thrice = base;
  thrice.gamma2 = 3.0;
  double l2 = sample_loss(m, s, twice);
  double l3 = sample_loss(m, s, thrice);
  CHECK(std::abs((l3 - l2) - (l2 - l1)) < 1e-9);  // equal increments: affine
}

// ---------------------------------------------------------------------------
// Training
// ---------------------------------------------------------------------------

static std::vector<Demonstration> demo_corpus(int n_tasks) {
  const Ontology& kb = fx::default_ontology();
  Scene scene = fx::demo_scene();
  std::vector<Demonstration> demos;
  for (int t = 0; t < n_tasks; ++t) {
    TaskSpec task = generate_meta_task(scene, kb, 9000 + static_cast<std::uint64_t>(t));
    demos.push_back(generate_expert_demo(scene, task, roster_setting("I"), kb, t % 5));
  }
  return demos;
}

TEST_CASE("a single-sample corpus is memorized") {
  const Ontology& kb = fx::default_ontology();
  Demonstration demo = demo_corpus(1)[0];
  // Keep exactly one sample of agent 2 (the mani agent).
  Demonstration tiny = demo;
  tiny.rounds.resize(1);
  TrainConfig cfg;
  cfg.epochs = 300;
  cfg.lr = 0.5;
  ImitationModel model = train_imitation({tiny}, kb, cfg);
  const auto& rec = tiny.rounds[0].agents[2];
  REQUIRE_FALSE(rec.sf.v.empty());
  HeadPrediction p = model.predict(2, rec.sf.v, rec.emb);
  CHECK(p.subgoal == rec.subgoal);
}

TEST_CASE("fixed seed reproduces identical final weights") {
  const Ontology& kb = fx::default_ontology();
  auto demos = demo_corpus(2);
  TrainConfig cfg;
  cfg.epochs = 3;
  ImitationModel a = train_imitation(demos, kb, cfg);
  ImitationModel b = train_imitation(demos, kb, cfg);
  CHECK(a.to_json().dump() == b.to_json().dump());
}

TEST_CASE("training loss trend is non-increasing over 5-epoch windows") {
  const Ontology& kb = fx::default_ontology();
  auto demos = demo_corpus(4);
  TrainConfig cfg;
  cfg.epochs = 20;
  ImitationModel model = train_imitation(demos, kb, cfg);
  REQUIRE(model.loss_trace.size() == 20);
  auto window = [&](int w) {
    double acc = 0.0;
    for (int e = w * 5; e < (w + 1) * 5; ++e) acc += model.loss_trace[static_cast<std::size_t>(e)];
    return acc / 5.0;
  };
  for (int w = 0; w + 1 < 4; ++w) CHECK(window(w + 1) <= window(w) + 1e-9);
}

TEST_CASE("model files round-trip") {
  const Ontology& kb = fx::default_ontology();
  auto demos = demo_corpus(1);
  TrainConfig cfg;
  cfg.epochs = 2;
  ImitationModel model = train_imitation(demos, kb, cfg);
  ImitationModel back = ImitationModel::from_json(model.to_json());
  CHECK(model.to_json().dump() == back.to_json().dump());
}

TEST_CASE("zero heads decode to class zero everywhere (documented mapping)") {
  const Ontology& kb = fx::default_ontology();
  LinearHeads m = LinearHeads::make(kb, 24, kSubtaskEmbDims);
  Vec sf(24, 0.5), emb(kSubtaskEmbDims, 0.5);
  HeadPrediction p = predict_heads(m, sf, emb);
  CHECK(p.subgoal.dx == -4);  // class 0
  CHECK(p.subgoal.dy == -4);
  CHECK(p.subgoal.drot == 0);
  CHECK(p.subgoal.ope == Ope::PickUp);
  CHECK_FALSE(p.subgoal.stop);
  CHECK(p.kind == 0);  // Explore
}

TEST_CASE("decoded outputs always satisfy the SubGoal set constraints") {
  const Ontology& kb = fx::default_ontology();
  Rng rng(31);
  LinearHeads m = LinearHeads::make(kb, 24, kSubtaskEmbDims);
  for (auto& [name, h] : m.heads)
    for (auto& w : h.W.a) w = normal(rng);
  for (int trial = 0; trial < 1000; ++trial) {
    Vec sf(24), emb(kSubtaskEmbDims);
    for (auto& x : sf) x = normal(rng) * 3;
    for (auto& x : emb) x = normal(rng) * 3;
    HeadPrediction p = predict_heads(m, sf, emb);
    CHECK(p.subgoal.valid());
  }
}

#include "doctest.h"

#include <fstream>

#include "aec/harness.hpp"
#include "aec/image_io.hpp"
#include "support.hpp"

using namespace aec;
using aec::testing::TempDir;

namespace {

ProtocolConfig small_config(ModelKind kind = ModelKind::parallel) {
  ProtocolConfig c;
  c.model = kind;
  c.seed = 11;
  c.scene_rows = c.scene_cols = aec::testing::kSmallSide;
  c.scenes_per_run = 2;
  c.fixations_per_scene = 10;
  c.steps_per_fixation = 10;
  c.metrics_interval = 50;
  c.test_scenes = 4;
  return c;
}

EvalConfig small_eval(EvalScenes kind = EvalScenes::uniform_plane) {
  EvalConfig e;
  e.scenes = kind;
  e.fixations = 12;
  e.fixations_per_scene = 4;
  return e;
}

bool same_records(const std::vector<TrajectoryRecord>& a, const std::vector<TrajectoryRecord>& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i].scene_id != b[i].scene_id || a[i].vergence != b[i].vergence || a[i].action != b[i].action ||
        a[i].residual != b[i].residual || a[i].rewards.parallel != b[i].rewards.parallel ||
        a[i].fixation_point != b[i].fixation_point || a[i].option != b[i].option)
      return false;
  }
  return true;
}

}  // namespace

TEST_SUITE("harness") {
  TEST_CASE("training logs every step in order") {
    const ProtocolConfig config = small_config();
    Checkpoint ck = start_training(config);
    std::vector<TrajectoryRecord> log;
    std::vector<MetricsRow> metrics;
    TrainingOptions opts;
    opts.on_step = [&](const TrajectoryRecord& r) { log.push_back(r); };
    opts.on_metrics = [&](const MetricsRow& m) { metrics.push_back(m); };
    run_training(ck, opts);
    REQUIRE(log.size() == 200);
    CHECK(ck.model.steps == 200);
    CHECK(ck.fixations_done == 20);
    for (std::size_t i = 0; i < log.size(); ++i) {
      REQUIRE(log[i].fixation == static_cast<long>(i / 10));
      REQUIRE(log[i].step == static_cast<int>(i % 10));
      REQUIRE(log[i].scene_id == "train-" + std::to_string(i / 100));
      REQUIRE(log[i].residual == log[i].ground_truth - std::clamp(log[i].vergence + log[i].action, -32, 32));
    }
    REQUIRE(metrics.size() == 4);
    CHECK(metrics.back().steps == 200);
    long fixations = 0;
    for (const MetricsRow& m : metrics) fixations += m.fixations;
    CHECK(fixations == 20);
  }

  TEST_CASE("consecutive steps chain the vergence") {
    Checkpoint ck = start_training(small_config(ModelKind::hierarchical));
    std::vector<TrajectoryRecord> log;
    TrainingOptions opts;
    opts.on_step = [&](const TrajectoryRecord& r) { log.push_back(r); };
    opts.stop_after_fixations = 5;
    run_training(ck, opts);
    REQUIRE(log.size() == 50);
    for (std::size_t i = 0; i + 1 < log.size(); ++i) {
      REQUIRE(log[i].option.has_value());
      if (log[i].fixation != log[i + 1].fixation) continue;
      REQUIRE(log[i + 1].vergence == std::clamp(log[i].vergence + log[i].action, -32, 32));
      REQUIRE(log[i + 1].fixation_point == log[i].fixation_point);
    }
  }

  TEST_CASE("training fixations start inside the residual range") {
    ProtocolConfig c = small_config();
    c.curriculum.pinned_fraction = 1.0;
    c.initial_residual_range = 6;
    const SceneProvider scenes(c);
    SceneSpec spec;
    spec.kind = SceneKind::conflict;
    spec.rows = spec.cols = 300;
    spec.foreground_disparity = 3;
    spec.background_disparity = -5;
    spec.foreground_extent = 30;
    const StereoScene conflict = generate_scene(spec, 1);
    for (long f = 0; f < 200; ++f) {
      const GazeState g = training_fixation(conflict, f, c);
      REQUIRE(g.fixation == *conflict.anchor);
      REQUIRE(std::abs(residual_disparity(conflict, g)) <= 6.0);
    }
    CHECK(training_fixation(conflict, 7, c) == training_fixation(conflict, 7, c));
  }

  TEST_CASE("training is deterministic and seed-sensitive") {
    ProtocolConfig c = small_config();
    c.scenes_per_run = 1;
    auto run = [](const ProtocolConfig& config) {
      Checkpoint ck = start_training(config);
      run_training(ck);
      return serialize_checkpoint(ck);
    };
    const std::string a = run(c);
    CHECK(run(c) == a);
    c.seed = 12;
    CHECK(run(c) != a);
  }

  TEST_CASE("train and test scenes never share ids or content") {
    const ProtocolConfig c = small_config();
    const SceneProvider scenes(c);
    CHECK(scenes.synthetic());
    for (long i = 0; i < 3; ++i) {
      const StereoScene train = scenes.training_scene(i);
      const StereoScene plane = scenes.test_scene(i, EvalScenes::uniform_plane);
      const StereoScene conflict = scenes.test_scene(i, EvalScenes::conflict);
      CHECK(train.id == "train-" + std::to_string(i));
      CHECK(plane.id == "test-plane-" + std::to_string(i));
      CHECK(conflict.id == "test-conflict-" + std::to_string(i));
      CHECK(!(train.left == plane.left).all());
      CHECK(!(train.left == conflict.left).all());
      CHECK(conflict.anchor.has_value());
      const double fg = conflict.disparity((*conflict.anchor).row, (*conflict.anchor).col);
      const double bg = conflict.disparity(0, 0);
      CHECK(std::abs(fg - bg) >= c.eval.conflict_min_separation);
      CHECK(std::abs(fg - bg) <= c.eval.conflict_max_separation);
    }
    CHECK((scenes.training_scene(1).left == SceneProvider(c).training_scene(1).left).all());
  }

  TEST_CASE("manifest scenes load and splits must be disjoint") {
    TempDir dir("manifest");
    const ProtocolConfig base = small_config();
    for (const char* name : {"a", "b"}) {
      std::filesystem::create_directories(dir / name);
      save_scene(aec::testing::plane_scene(name[0] == 'a' ? 2 : -3, name[0]), dir / name);
    }
    std::ofstream(dir / "scenes.csv") << "split,left,right,disparity\n"
                                         "train,a/left.pgm,a/right.pgm,a/disparity.csv\n"
                                         "test,b/left.pgm,b/right.pgm,b/disparity.csv\n";
    ProtocolConfig c = base;
    c.scene_manifest = (dir / "scenes.csv").string();
    const SceneProvider scenes(c);
    CHECK(!scenes.synthetic());
    CHECK(scenes.training_scene(5).disparity(0, 0) == 2.0);
    CHECK(scenes.test_scene(0, EvalScenes::uniform_plane).disparity(0, 0) == -3.0);
    CHECK(scenes.training_scene(5).id == "train-5");

    std::ofstream(dir / "leak.csv") << "train,a/left.pgm,a/right.pgm,a/disparity.csv\n"
                                       "test,a/left.pgm,b/right.pgm,b/disparity.csv\n";
    c.scene_manifest = (dir / "leak.csv").string();
    CHECK_THROWS_AS(SceneProvider{c}, FormatError);
    std::ofstream(dir / "empty.csv") << "train,a/left.pgm,a/right.pgm,a/disparity.csv\n";
    c.scene_manifest = (dir / "empty.csv").string();
    CHECK_THROWS_AS(SceneProvider{c}, FormatError);
  }

  TEST_CASE("the oracle reaches every initial residual within ten steps") {
    const StereoScene s = aec::testing::plane_scene(3);
    const Controller oracle = oracle_controller();
    Rng rng = make_stream(1);
    for (int r0 = -16; r0 <= 16; ++r0) {
      GazeState g{{120, 120}, 3 - r0};
      for (int t = 0; t < 10; ++t) g = apply_action(g, kVergenceActions[oracle(s, g, rng).action_index]);
      REQUIRE(std::abs(residual_disparity(s, g)) <= 1.0);
    }
    EvalConfig e = small_eval();
    e.initial_residual_range = 16;
    const EvaluationResult r = run_evaluation(small_config(), e, oracle, 3);
    CHECK(r.summary.convergence_rate == 1.0);
    CHECK(r.summary.mean_final_residual == 0.0);
    CHECK(r.summary.mean_oscillation == 0.0);
  }

  TEST_CASE("oscillation metric examples") {
    CHECK(oscillation_metric({2, 0, 0, 0, 0}) == 0);
    CHECK(oscillation_metric({2, -2, 2, -2, 1}) == 4);
    CHECK(oscillation_metric({-4, -2, -1, 0, 0}) == 0);
    CHECK(oscillation_metric({0, 0, 0, 0, 0}) == 0);
    CHECK(oscillation_metric({2, 0, -2, 0, 2}) == 2);
    CHECK(oscillation_metric({4, 2, 1, 0, 0}) == 0);
    CHECK(oscillation_metric({-8, -8, 8, 8, 8, 1, -1, 0, 0}) == 1);
    CHECK_THROWS_AS(oscillation_metric({1, -1, 1, -1}), std::invalid_argument);
  }

  TEST_CASE("summaries of hand-built records") {
    std::vector<TrajectoryRecord> records(10);
    for (int i = 0; i < 10; ++i) {
      records[i].step = i % 5;
      records[i].action = i % 2 ? 1 : -1;
      records[i].option = i < 5 ? Option::outer_peripheral : Option::foveal;
    }
    records[4].residual = 0.5;
    records[9].residual = -3.0;
    const EvaluationSummary s = summarize(records, 5);
    CHECK(s.fixations == 2);
    CHECK(s.convergence_rate == 0.5);
    CHECK(s.mean_final_residual == doctest::Approx(1.75));
    CHECK(s.median_final_residual == doctest::Approx(1.75));
    CHECK(s.mean_oscillation == 4.0);
    CHECK(s.selections[2] == 5);
    CHECK(s.selections[0] == 5);
    CHECK(s.mean_selection_step[2] == doctest::Approx(2.0));
    CHECK(std::isnan(s.mean_selection_step[0]));
    CHECK_THROWS_AS(summarize(records, 3), std::invalid_argument);
  }

  TEST_CASE("an untrained model stays put under greedy control") {
    const Checkpoint ck = start_training(small_config());
    EvalConfig e = small_eval();
    e.fixations = 42;
    e.fixations_per_scene = 6;
    const EvaluationResult r = run_evaluation(ck, e, 5);
    for (const TrajectoryRecord& rec : r.records) {
      REQUIRE(rec.action == 0);
      REQUIRE(rec.rewards.parallel < 0.0);
    }
    // Only fixations that start within one pixel count as converged.
    int near = 0;
    for (int f = 0; f < e.fixations; ++f) near += std::abs(r.records[f * 10].residual) <= 1.0;
    CHECK(r.summary.convergence_rate == doctest::Approx(near / 42.0));
    CHECK(r.summary.convergence_rate < 0.5);
  }

  TEST_CASE("evaluation and probing do not depend on the worker count") {
    Checkpoint ck = start_training(small_config(ModelKind::hierarchical));
    TrainingOptions opts;
    opts.stop_after_fixations = 3;
    run_training(ck, opts);
    for (EvalScenes kind : {EvalScenes::uniform_plane, EvalScenes::conflict}) {
      const EvaluationResult one = run_evaluation(ck, small_eval(kind), 9, 1);
      const EvaluationResult three = run_evaluation(ck, small_eval(kind), 9, 3);
      CHECK(same_records(one.records, three.records));
      CHECK(one.records.size() == 120);
    }
    ProbeConfig p;
    p.min_disparity = -3;
    p.max_disparity = 3;
    p.probes_per_disparity = 6;
    const PolicyMatrix a = probe_policy(ck, p, 4, 1), b = probe_policy(ck, p, 4, 3);
    CHECK(a.vergence == b.vergence);
    CHECK(a.selection == b.selection);
    CHECK(a.greedy == b.greedy);
  }

  TEST_CASE("conflict evaluation fixates the foreground anchor") {
    const EvaluationResult r =
        run_evaluation(small_config(), small_eval(EvalScenes::conflict), oracle_controller(), 2);
    for (const TrajectoryRecord& rec : r.records) REQUIRE(rec.scene_id.rfind("test-conflict-", 0) == 0);
    CHECK(r.summary.convergence_rate == 1.0);
  }

  TEST_CASE("policy probes produce distributions per disparity") {
    for (ModelKind kind : {ModelKind::parallel, ModelKind::hierarchical}) {
      const Checkpoint ck = start_training(small_config(kind));
      ProbeConfig p;
      p.min_disparity = -2;
      p.max_disparity = 2;
      p.probes_per_disparity = 3;
      const PolicyMatrix m = probe_policy(ck, p, 1);
      CHECK(m.disparities == std::vector<int>{-2, -1, 0, 1, 2});
      CHECK(m.vergence.rows() == kNumActions);
      CHECK(m.vergence.cols() == 5);
      for (int k = 0; k < 5; ++k) {
        CHECK(m.vergence.col(k).sum() == doctest::Approx(1.0));
        CHECK(m.greedy.col(k).sum() == doctest::Approx(1.0));
        // Zero weights: uniform policy, greedy tie-break to no movement.
        CHECK(m.greedy(5, k) == 1.0);
      }
      if (kind == ModelKind::hierarchical) {
        CHECK(m.selection.rows() == kNumOptions);
        CHECK(m.selection.col(0).sum() == doctest::Approx(1.0));
        CHECK(m.bottom[2].col(4).sum() == doctest::Approx(1.0));
      }
      p.max_disparity = 33;
      CHECK_THROWS_AS(probe_policy(ck, p, 1), std::out_of_range);
    }
  }
}

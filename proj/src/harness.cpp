#include "aec/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <fstream>
#include <limits>
#include <sstream>
#include <thread>

#include "aec/pyramid.hpp"

namespace aec {
namespace {

// Stream tags under the master seed.
enum Tag : std::uint64_t {
  kTrainScene = 0x7472,
  kTrainTexture,
  kTrainFixation,
  kTrainStep,
  kTestScene,
  kTestTexture,
  kEvalFixation,
  kProbe,
  kModelInit,
};

int uniform_int(Rng& rng, int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); }

// Runs fn(i) for i in [0, n) on up to `workers` threads. Results must be
// written by index; the first exception (lowest index) is rethrown.
template <typename Fn>
void parallel_for(int n, int workers, Fn&& fn) {
  workers = std::clamp(workers, 1, std::max(n, 1));
  if (workers == 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  std::vector<std::exception_ptr> errors(n);
  std::vector<std::thread> pool;
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (int i = next++; i < n; i = next++) {
        try {
          fn(i);
        } catch (...) {
          errors[i] = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

// Starting vergence that leaves `residual` pixels to the ground truth.
GazeState with_residual(const StereoScene& scene, GazeState gaze, int residual, const EnvironmentLimits& limits) {
  const int truth = static_cast<int>(std::lround(ground_truth_vergence(scene, gaze)));
  gaze.vergence = std::clamp(truth - residual, -limits.max_vergence, limits.max_vergence);
  return gaze;
}

TrajectoryRecord make_record(long fixation, int step, const StereoScene& scene, const GazeState& before, int delta,
                             std::optional<Option> option, const RewardSet& rewards, const GazeState& after) {
  TrajectoryRecord r;
  r.fixation = fixation;
  r.step = step;
  r.scene_id = scene.id;
  r.fixation_point = before.fixation;
  r.vergence = before.vergence;
  r.ground_truth = ground_truth_vergence(scene, after);
  r.action = delta;
  r.option = option;
  r.rewards = rewards;
  r.residual = r.ground_truth - after.vergence;
  return r;
}

class MetricsWindow {
 public:
  void add_step(const StepDiagnostics& d) {
    ++steps_;
    rewards_.parallel += d.rewards.parallel;
    rewards_.foveal += d.rewards.foveal;
    rewards_.inner_peripheral += d.rewards.inner_peripheral;
    rewards_.outer_peripheral += d.rewards.outer_peripheral;
    if (d.option) ++selections_[static_cast<int>(*d.option)];
  }
  void add_fixation(double final_residual) {
    ++fixations_;
    residual_sum_ += std::abs(final_residual);
    converged_ += std::abs(final_residual) <= 1.0;
  }
  MetricsRow flush(long total_steps) {
    MetricsRow row;
    row.steps = total_steps;
    row.fixations = fixations_;
    if (fixations_ > 0) {
      row.mean_final_residual = residual_sum_ / fixations_;
      row.convergence_rate = static_cast<double>(converged_) / fixations_;
    }
    if (steps_ > 0) {
      row.mean_rewards = {rewards_.parallel / steps_, rewards_.foveal / steps_, rewards_.inner_peripheral / steps_,
                          rewards_.outer_peripheral / steps_};
      for (int o = 0; o < kNumOptions; ++o) row.selection_frequency[o] = static_cast<double>(selections_[o]) / steps_;
    }
    *this = {};
    return row;
  }

 private:
  long steps_ = 0;
  long fixations_ = 0;
  long converged_ = 0;
  double residual_sum_ = 0.0;
  RewardSet rewards_;
  std::array<long, kNumOptions> selections_{};
};

double median(std::vector<double> v) {
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  const auto mid = v.begin() + static_cast<long>(v.size() / 2);
  std::nth_element(v.begin(), mid, v.end());
  if (v.size() % 2 == 1) return *mid;
  const double upper = *mid;
  const double lower = *std::max_element(v.begin(), mid);
  return 0.5 * (lower + upper);
}

}  // namespace

SceneProvider::SceneProvider(const ProtocolConfig& config) : config_(&config) {
  if (config.scene_manifest.empty()) return;
  const std::filesystem::path manifest(config.scene_manifest);
  std::ifstream in(manifest);
  if (!in) throw std::invalid_argument("cannot open scene manifest " + manifest.string());
  const auto base = manifest.parent_path();
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    std::stringstream ss(line);
    std::string split, left, right, disparity;
    if (!std::getline(ss, split, ',') || !std::getline(ss, left, ',') || !std::getline(ss, right, ',') ||
        !std::getline(ss, disparity))
      throw FormatError("scene manifest line " + std::to_string(line_no) + ": expected split,left,right,disparity");
    if (split == "split") continue;
    ManifestEntry e{base / left, base / right, base / disparity};
    if (split == "train") {
      train_.push_back(e);
    } else if (split == "test") {
      test_.push_back(e);
    } else {
      throw FormatError("scene manifest line " + std::to_string(line_no) + ": unknown split '" + split + "'");
    }
  }
  if (train_.empty() || test_.empty())
    throw FormatError("scene manifest needs at least one train and one test scene");
  for (const auto& a : train_)
    for (const auto& b : test_)
      if (std::filesystem::weakly_canonical(a.left) == std::filesystem::weakly_canonical(b.left))
        throw FormatError("scene manifest lists " + a.left.string() + " in both splits");
}

StereoScene SceneProvider::load(const ManifestEntry& e, const std::string& id) const {
  StereoScene scene = load_scene(e.left, e.right, e.disparity, config_->limits);
  scene.id = id;
  if (scene.rows() < minimum_scene_side(config_->limits) || scene.cols() < minimum_scene_side(config_->limits))
    throw FormatError("scene " + e.left.string() + " is too small for the sensor");
  return scene;
}

StereoScene SceneProvider::training_scene(long index) const {
  const ProtocolConfig& c = *config_;
  const std::string id = "train-" + std::to_string(index);
  if (!synthetic()) return load(train_[static_cast<std::size_t>(index) % train_.size()], id);

  Rng rng = make_stream(c.seed, {kTrainScene, static_cast<std::uint64_t>(index)});
  SceneSpec spec;
  spec.rows = c.scene_rows;
  spec.cols = c.scene_cols;
  spec.texture = c.texture;
  if (std::uniform_real_distribution<double>(0.0, 1.0)(rng) < c.curriculum.uniform_fraction) {
    spec.kind = SceneKind::uniform_plane;
    const int r = c.curriculum.plane_disparity_range;
    spec.background_disparity = uniform_int(rng, -r, r);
  } else {
    spec.kind = SceneKind::conflict;
    const int r = c.curriculum.conflict_disparity_range;
    spec.background_disparity = uniform_int(rng, -r, r);
    spec.foreground_disparity = uniform_int(rng, -r, r);
    spec.foreground_extent = uniform_int(rng, c.curriculum.min_extent, c.curriculum.max_extent);
  }
  return generate_scene(spec, derive_seed(c.seed, {kTrainTexture, static_cast<std::uint64_t>(index)}), c.limits, id);
}

StereoScene SceneProvider::test_scene(long index, EvalScenes kind) const {
  const ProtocolConfig& c = *config_;
  const bool plane = kind == EvalScenes::uniform_plane;
  const std::string id = std::string("test-") + (plane ? "plane-" : "conflict-") + std::to_string(index);
  if (!synthetic()) return load(test_[static_cast<std::size_t>(index) % test_.size()], id);

  const std::uint64_t k = plane ? 0 : 1;
  Rng rng = make_stream(c.seed, {kTestScene, k, static_cast<std::uint64_t>(index)});
  SceneSpec spec;
  spec.rows = c.scene_rows;
  spec.cols = c.scene_cols;
  spec.texture = c.texture;
  if (plane) {
    spec.kind = SceneKind::uniform_plane;
    const int r = c.eval.plane_disparity_range;
    spec.background_disparity = uniform_int(rng, -r, r);
  } else {
    spec.kind = SceneKind::conflict;
    const int separation = uniform_int(rng, c.eval.conflict_min_separation, c.eval.conflict_max_separation);
    const int sign = uniform_int(rng, 0, 1) == 0 ? -1 : 1;
    const int spare = std::max(0, c.limits.max_disparity - separation);
    spec.foreground_disparity = uniform_int(rng, -std::min(4, spare), std::min(4, spare));
    spec.background_disparity = std::clamp(spec.foreground_disparity + sign * separation, -c.limits.max_disparity,
                                           c.limits.max_disparity);
    spec.foreground_extent = c.eval.conflict_extent;
  }
  return generate_scene(spec, derive_seed(c.seed, {kTestTexture, k, static_cast<std::uint64_t>(index)}), c.limits,
                        id);
}

GazeState training_fixation(const StereoScene& scene, long fixation, const ProtocolConfig& config) {
  Rng rng = make_stream(config.seed, {kTrainFixation, static_cast<std::uint64_t>(fixation)});
  const bool pin =
      scene.anchor && std::uniform_real_distribution<double>(0.0, 1.0)(rng) < config.curriculum.pinned_fraction;
  GazeState gaze =
      sample_fixation(scene, rng, config.limits, pin ? FixationMode::pinned_to_anchor : FixationMode::uniform);
  const int r = config.initial_residual_range;
  return with_residual(scene, gaze, uniform_int(rng, -r, r), config.limits);
}

Checkpoint start_training(const ProtocolConfig& config) {
  validate(config);
  Checkpoint ck;
  ck.config = config;
  ck.model = make_agent(config.model, derive_seed(config.seed, {kModelInit}), config.agent);
  return ck;
}

void run_training(Checkpoint& ck, const TrainingOptions& options) {
  const ProtocolConfig& config = ck.config;
  validate(config);
  if (ck.model.kind != config.model) throw std::invalid_argument("checkpoint model kind disagrees with its config");
  const SceneProvider scenes(config);
  const long total = static_cast<long>(config.scenes_per_run) * config.fixations_per_scene;
  const long stop = options.stop_after_fixations ? std::min(total, ck.fixations_done + *options.stop_after_fixations)
                                                 : total;
  const std::filesystem::path checkpoint_path =
      options.checkpoint_dir.empty() ? std::filesystem::path() : options.checkpoint_dir / "checkpoint.bin";

  MetricsWindow window;
  long last_bucket = ck.model.steps / config.metrics_interval;
  StereoScene scene;
  long scene_index = -1;
  while (ck.fixations_done < stop) {
    const long fixation = ck.fixations_done;
    const long block = fixation / config.fixations_per_scene;
    if (block != scene_index) {
      scene = scenes.training_scene(block);
      scene_index = block;
    }
    try {
      FixationState state = begin_fixation(ck.model, scene, training_fixation(scene, fixation, config));
      double final_residual = 0.0;
      for (int step = 0; step < config.steps_per_fixation; ++step) {
        Rng rng = make_stream(config.seed,
                              {kTrainStep, static_cast<std::uint64_t>(fixation), static_cast<std::uint64_t>(step)});
        const StepDiagnostics d =
            train_step(ck.model, scene, state, step + 1 == config.steps_per_fixation, rng, config.agent);
        window.add_step(d);
        final_residual = d.residual;
        if (options.on_step)
          options.on_step(make_record(fixation, step, scene, d.before, d.delta, d.option, d.rewards, d.after));
      }
      window.add_fixation(final_residual);
    } catch (const NumericalFault& e) {
      std::string msg = std::string("training aborted at fixation ") + std::to_string(fixation) + ": " + e.what();
      if (!checkpoint_path.empty() && std::filesystem::exists(checkpoint_path))
        msg += "; last good checkpoint kept at " + checkpoint_path.string();
      throw TrainingAborted(msg);
    }
    ++ck.fixations_done;
    if (options.on_metrics && ck.model.steps / config.metrics_interval > last_bucket) {
      last_bucket = ck.model.steps / config.metrics_interval;
      options.on_metrics(window.flush(ck.model.steps));
    }
    if (!checkpoint_path.empty() && config.checkpoint_interval > 0 &&
        ck.fixations_done % config.checkpoint_interval == 0) {
      std::filesystem::create_directories(options.checkpoint_dir);
      save_checkpoint(ck, checkpoint_path);
    }
  }
}

Controller greedy_controller(const AgentModel& model) {
  return [&model](const StereoScene& scene, const GazeState& gaze, Rng& rng) {
    const FixationState state = observe(model, scene, gaze);
    if (model.kind == ModelKind::parallel) {
      const ParallelDecision d = act_parallel(model.parallel, state.features, ActMode::greedy, rng);
      return ControlDecision{d.action_index, std::nullopt, compute_rewards(state.bundle)};
    }
    const HierarchicalDecision d = act_hierarchical(model.hierarchical, state.features, ActMode::greedy, rng);
    return ControlDecision{d.action_index, d.option, compute_rewards(state.bundle)};
  };
}

Controller oracle_controller() {
  return [](const StereoScene& scene, const GazeState& gaze, Rng&) {
    const double residual = residual_disparity(scene, gaze);
    int best = 0;
    for (int a = 1; a < kNumActions; ++a) {
      const double da = std::abs(kVergenceActions[a] - residual);
      const double db = std::abs(kVergenceActions[best] - residual);
      if (da < db || (da == db && std::abs(kVergenceActions[a]) < std::abs(kVergenceActions[best]))) best = a;
    }
    return ControlDecision{best, std::nullopt, std::nullopt};
  };
}

int oscillation_metric(const std::vector<int>& actions) {
  if (actions.size() < 5) throw std::invalid_argument("oscillation_metric needs at least five actions");
  int alternations = 0;
  int previous = 0;
  for (auto it = actions.end() - 5; it != actions.end(); ++it) {
    if (*it == 0) continue;
    if (previous != 0 && (*it > 0) != (previous > 0)) ++alternations;
    previous = *it;
  }
  return alternations;
}

EvaluationSummary summarize(const std::vector<TrajectoryRecord>& records, int steps_per_fixation) {
  if (steps_per_fixation <= 0 || records.size() % static_cast<std::size_t>(steps_per_fixation) != 0)
    throw std::invalid_argument("record count is not a whole number of fixations");
  EvaluationSummary s;
  s.fixations = static_cast<int>(records.size() / steps_per_fixation);
  std::vector<double> finals;
  double oscillation = 0.0;
  std::array<double, kNumOptions> step_sum{};
  std::array<long, kNumOptions> step_count{};
  for (int f = 0; f < s.fixations; ++f) {
    const auto first = records.begin() + static_cast<long>(f) * steps_per_fixation;
    const double final_residual = std::abs((first + steps_per_fixation - 1)->residual);
    finals.push_back(final_residual);
    const bool converged = final_residual <= 1.0;
    std::vector<int> actions;
    for (auto it = first; it != first + steps_per_fixation; ++it) {
      actions.push_back(it->action);
      if (!it->option) continue;
      const int o = static_cast<int>(*it->option);
      ++s.selections[o];
      if (converged) {
        step_sum[o] += it->step;
        ++step_count[o];
      }
    }
    if (steps_per_fixation >= 5) oscillation += oscillation_metric(actions);
  }
  if (s.fixations > 0) {
    s.median_final_residual = median(finals);
    double sum = 0.0;
    int converged = 0;
    for (double v : finals) {
      sum += v;
      converged += v <= 1.0;
    }
    s.mean_final_residual = sum / s.fixations;
    s.convergence_rate = static_cast<double>(converged) / s.fixations;
    s.mean_oscillation =
        steps_per_fixation >= 5 ? oscillation / s.fixations : std::numeric_limits<double>::quiet_NaN();
  }
  for (int o = 0; o < kNumOptions; ++o)
    s.mean_selection_step[o] =
        step_count[o] > 0 ? step_sum[o] / step_count[o] : std::numeric_limits<double>::quiet_NaN();
  return s;
}

EvaluationResult run_evaluation(const ProtocolConfig& config, const EvalConfig& eval, const Controller& controller,
                                std::uint64_t seed, int workers) {
  ProtocolConfig cfg = config;
  cfg.seed = seed;
  cfg.eval = eval;
  validate(cfg);
  const SceneProvider scenes(cfg);
  const int per_scene = eval.fixations_per_scene;
  const int n_scenes = (eval.fixations + per_scene - 1) / per_scene;
  const int steps = eval.steps_per_fixation;

  std::vector<TrajectoryRecord> records(static_cast<std::size_t>(eval.fixations) * steps);
  parallel_for(n_scenes, workers, [&](int s) {
    const StereoScene scene = scenes.test_scene(s, eval.scenes);
    const FixationMode mode =
        eval.scenes == EvalScenes::conflict ? FixationMode::pinned_to_anchor : FixationMode::uniform;
    for (int f = s * per_scene; f < std::min(eval.fixations, (s + 1) * per_scene); ++f) {
      Rng rng = make_stream(seed, {kEvalFixation, static_cast<std::uint64_t>(f)});
      GazeState gaze = sample_fixation(scene, rng, cfg.limits, mode);
      gaze = with_residual(scene, gaze, uniform_int(rng, -eval.initial_residual_range, eval.initial_residual_range),
                           cfg.limits);
      TrajectoryRecord* out = &records[static_cast<std::size_t>(f) * steps];
      ControlDecision d = controller(scene, gaze, rng);
      for (int t = 0; t < steps; ++t) {
        const GazeState next = apply_action(gaze, kVergenceActions[d.action_index], cfg.limits);
        out[t] = make_record(f, t, scene, gaze, kVergenceActions[d.action_index], d.option, {}, next);
        gaze = next;
        // A step's rewards belong to the view it leads to, which the next
        // decision observes anyway.
        const bool last = t + 1 == steps;
        if (last && !d.view_rewards) break;
        d = controller(scene, gaze, rng);
        if (d.view_rewards) out[t].rewards = *d.view_rewards;
      }
    }
  });
  EvaluationResult result;
  result.summary = summarize(records, steps);
  result.records = std::move(records);
  return result;
}

EvaluationResult run_evaluation(const Checkpoint& checkpoint, const EvalConfig& eval, std::uint64_t seed,
                                int workers) {
  if (checkpoint.model.kind != checkpoint.config.model)
    throw std::invalid_argument("checkpoint model kind disagrees with its config");
  return run_evaluation(checkpoint.config, eval, greedy_controller(checkpoint.model), seed, workers);
}

PolicyMatrix probe_policy(const Checkpoint& checkpoint, const ProbeConfig& probe, std::uint64_t seed, int workers) {
  const ProtocolConfig& config = checkpoint.config;
  const AgentModel& model = checkpoint.model;
  if (probe.min_disparity > probe.max_disparity || probe.probes_per_disparity <= 0)
    throw std::invalid_argument("empty probe range");
  if (std::max(std::abs(probe.min_disparity), std::abs(probe.max_disparity)) > config.limits.max_vergence)
    throw std::out_of_range("probe disparity exceeds the window bounds (max " +
                            std::to_string(config.limits.max_vergence) + ")");
  ProtocolConfig cfg = config;
  cfg.seed = seed;
  const SceneProvider scenes(cfg);
  const bool hierarchical = model.kind == ModelKind::hierarchical;
  const int nd = probe.max_disparity - probe.min_disparity + 1;
  const int np = probe.probes_per_disparity;

  struct ProbeResult {
    Eigen::VectorXd vergence;
    int greedy = 0;
    Eigen::VectorXd selection;
    std::array<Eigen::VectorXd, kNumOptions> bottom;
  };
  std::vector<ProbeResult> results(static_cast<std::size_t>(np) * nd);
  const int n_scenes = std::min(np, config.test_scenes);

  parallel_for(n_scenes, workers, [&](int s) {
    const StereoScene scene = scenes.test_scene(s, EvalScenes::uniform_plane);
    for (int p = s; p < np; p += n_scenes) {
      Rng rng = make_stream(seed, {kProbe, static_cast<std::uint64_t>(p)});
      const GazeState gaze = sample_fixation(scene, rng, cfg.limits);
      const PixelPos at = gaze.fixation;
      for (int k = 0; k < nd; ++k) {
        const int d = probe.min_disparity + k;
        const PooledFeatures features = assemble_features(
            encode_pyramid(model.dictionaries, extract_pyramid(scene.left, scene.left, at.row, at.col, at.col - d)));
        ProbeResult& r = results[static_cast<std::size_t>(p) * nd + k];
        if (!hierarchical) {
          r.vergence = action_distribution(model.parallel.net, features.parallel);
          r.greedy = greedy_vergence_action(r.vergence);
          continue;
        }
        const HierarchicalDecision dec = act_hierarchical(model.hierarchical, features, ActMode::greedy, rng);
        r.selection = dec.p_top;
        r.vergence = Eigen::VectorXd::Zero(kNumActions);
        for (int o = 0; o < kNumOptions; ++o) {
          r.bottom[o] = dec.p_bottom[o];
          r.vergence += dec.p_top[o] * dec.p_bottom[o];
        }
        r.greedy = dec.action_index;
      }
    }
  });

  PolicyMatrix m;
  m.kind = model.kind;
  for (int k = 0; k < nd; ++k) m.disparities.push_back(probe.min_disparity + k);
  m.probe_counts.assign(nd, np);
  m.vergence = Eigen::MatrixXd::Zero(kNumActions, nd);
  m.greedy = Eigen::MatrixXd::Zero(kNumActions, nd);
  if (hierarchical) {
    m.selection = Eigen::MatrixXd::Zero(kNumOptions, nd);
    for (auto& b : m.bottom) b = Eigen::MatrixXd::Zero(kNumActions, nd);
  }
  for (int p = 0; p < np; ++p) {
    for (int k = 0; k < nd; ++k) {
      const ProbeResult& r = results[static_cast<std::size_t>(p) * nd + k];
      m.vergence.col(k) += r.vergence;
      m.greedy(r.greedy, k) += 1.0;
      if (!hierarchical) continue;
      m.selection.col(k) += r.selection;
      for (int o = 0; o < kNumOptions; ++o) m.bottom[o].col(k) += r.bottom[o];
    }
  }
  const double scale = 1.0 / np;
  m.vergence *= scale;
  m.greedy *= scale;
  if (hierarchical) {
    m.selection *= scale;
    for (auto& b : m.bottom) b *= scale;
  }
  return m;
}

}  // namespace aec

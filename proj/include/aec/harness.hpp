#pragma once

#include <array>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "aec/agent.hpp"
#include "aec/checkpoint.hpp"
#include "aec/config.hpp"

namespace aec {

/// One executed vergence step.
struct TrajectoryRecord {
  long fixation = 0;
  int step = 0;
  std::string scene_id;
  PixelPos fixation_point;
  /// Vergence before the action is executed.
  int vergence = 0;
  double ground_truth = 0.0;
  int action = 0;
  std::optional<Option> option;
  RewardSet rewards;
  /// Foveal residual disparity after the action.
  double residual = 0.0;
};

/// Scenes for training and evaluation. Synthetic scenes are regenerated from
/// (master seed, split, index); manifest scenes are loaded once and cycled.
class SceneProvider {
 public:
  explicit SceneProvider(const ProtocolConfig& config);

  /// Scene shown during training block `index`, drawn from the curriculum.
  StereoScene training_scene(long index) const;

  /// Held-out scene `index` of the given kind. Test ids never collide with
  /// training ids.
  StereoScene test_scene(long index, EvalScenes kind) const;

  bool synthetic() const { return train_.empty(); }

 private:
  struct ManifestEntry {
    std::filesystem::path left, right, disparity;
  };
  StereoScene load(const ManifestEntry& e, const std::string& id) const;

  const ProtocolConfig* config_;
  std::vector<ManifestEntry> train_;
  std::vector<ManifestEntry> test_;
};

/// Starting gaze of training fixation `fixation` on `scene`.
GazeState training_fixation(const StereoScene& scene, long fixation, const ProtocolConfig& config);

struct MetricsRow {
  long steps = 0;
  long fixations = 0;
  double mean_final_residual = 0.0;
  double convergence_rate = 0.0;
  RewardSet mean_rewards;
  std::array<double, kNumOptions> selection_frequency{};
};

struct TrainingOptions {
  /// Called for every executed step, in order.
  std::function<void(const TrajectoryRecord&)> on_step;
  std::function<void(const MetricsRow&)> on_metrics;
  /// Directory for periodic checkpoints (config.checkpoint_interval); the
  /// latest is always `checkpoint.bin` there.
  std::filesystem::path checkpoint_dir;
  /// Stop once this many fixations (counted from the start of the run) are done.
  std::optional<long> stop_after_fixations;
};

/// Raised when learning goes non-finite; the last periodic checkpoint, if
/// any, is left untouched on disk.
class TrainingAborted : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

Checkpoint start_training(const ProtocolConfig& config);

/// Continues `checkpoint` until the configured number of fixations is done
/// (or the stop option triggers). Deterministic given the master seed:
/// resuming from any saved checkpoint reproduces the uninterrupted run.
void run_training(Checkpoint& checkpoint, const TrainingOptions& options = {});

struct ControlDecision {
  int action_index = 0;
  std::optional<Option> option;
  /// Rewards of the view the decision was made from, when the controller
  /// encodes it.
  std::optional<RewardSet> view_rewards;
};

/// Chooses the next vergence action at `gaze`. Controllers do their own
/// perception and must be safe to call concurrently.
using Controller = std::function<ControlDecision(const StereoScene& scene, const GazeState& gaze, Rng& rng)>;

/// Frozen model acting greedily at every level.
Controller greedy_controller(const AgentModel& model);

/// Test double that knows the ground truth: picks the action closest to the
/// residual, preferring the smaller shift on ties.
Controller oracle_controller();

/// Number of sign alternations among consecutive nonzero actions in the last
/// five entries. Throws std::invalid_argument for fewer than five actions.
int oscillation_metric(const std::vector<int>& actions);

struct EvaluationSummary {
  int fixations = 0;
  double median_final_residual = 0.0;
  double mean_final_residual = 0.0;
  double convergence_rate = 0.0;
  double mean_oscillation = 0.0;
  /// Hierarchical only: how often each option executed, and the mean step
  /// index of each option's selections within converging fixations (NaN when
  /// an option was never selected there).
  std::array<long, kNumOptions> selections{};
  std::array<double, kNumOptions> mean_selection_step{};
};

struct EvaluationResult {
  std::vector<TrajectoryRecord> records;
  EvaluationSummary summary;
};

EvaluationResult run_evaluation(const Checkpoint& checkpoint, const EvalConfig& eval, std::uint64_t seed,
                                int workers = 1);

/// Same protocol with an arbitrary controller (e.g. the oracle).
EvaluationResult run_evaluation(const ProtocolConfig& config, const EvalConfig& eval, const Controller& controller,
                                std::uint64_t seed, int workers = 1);

EvaluationSummary summarize(const std::vector<TrajectoryRecord>& records, int steps_per_fixation);

/// Mean action distributions over uniform-disparity probes. Columns are
/// probe disparities, rows actions (or options for `selection`).
struct PolicyMatrix {
  ModelKind kind = ModelKind::parallel;
  std::vector<int> disparities;
  std::vector<int> probe_counts;
  /// Executed-action distribution: the parallel policy, or for the
  /// hierarchical model the selection-weighted mix of the bottom policies.
  Eigen::MatrixXd vergence;
  /// Fraction of probes whose greedy action is each action.
  Eigen::MatrixXd greedy;
  /// Hierarchical only.
  Eigen::MatrixXd selection;
  std::array<Eigen::MatrixXd, kNumOptions> bottom;
};

/// Probe p fixates test scene p mod test_scenes; both eyes see its left
/// image with the right window shifted by d, so the residual is -d.
PolicyMatrix probe_policy(const Checkpoint& checkpoint, const ProbeConfig& probe, std::uint64_t seed,
                          int workers = 1);

}  // namespace aec

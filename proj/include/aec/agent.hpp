#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "aec/environment.hpp"
#include "aec/gassom.hpp"
#include "aec/learner.hpp"
#include "aec/policy.hpp"

namespace aec {

enum class ModelKind { parallel, hierarchical };

const char* to_string(ModelKind kind);
ModelKind model_kind_from_string(const std::string& s);

struct AgentConfig {
  GassomConfig gassom;
  LearnerConfig learner;
  EnvironmentLimits limits;
  double temperature = 1.0;
  bool learn_dictionaries = true;
};

/// Reward channels tracked by the normalizers. The selector uses `parallel`.
enum class Channel : int { parallel = 0, foveal = 1, inner_peripheral = 2, outer_peripheral = 3 };

/// Everything that learns: three dictionaries, the policy networks, their
/// critics and the reward normalizers. Network slots are [parallel] for the
/// parallel model and [selector, F, IP, OP] for the hierarchical one.
struct AgentModel {
  ModelKind kind = ModelKind::parallel;
  DictionarySet dictionaries;
  ParallelPolicy parallel;
  HierarchicalPolicy hierarchical;
  std::vector<CriticState> critics;
  std::vector<long> update_counts;
  std::array<RewardNormalizer, 4> normalizers;
  long steps = 0;

  int num_networks() const { return kind == ModelKind::parallel ? 1 : 1 + kNumOptions; }
  PolicyNetwork& network(int slot);
  const PolicyNetwork& network(int slot) const;
};

AgentModel make_agent(ModelKind kind, std::uint64_t seed, const AgentConfig& config = {});

/// Gaze plus the encoding of what the agent currently sees.
struct FixationState {
  GazeState gaze;
  FeatureBundle bundle;
  PooledFeatures features;
};

/// Encodes the view at `gaze` and resets every eligibility trace.
FixationState begin_fixation(AgentModel& model, const StereoScene& scene, const GazeState& gaze);

/// Encodes the view at `gaze` without touching learning state.
FixationState observe(const AgentModel& model, const StereoScene& scene, const GazeState& gaze);

struct StepDiagnostics {
  GazeState before;
  GazeState after;
  int action_index = 0;
  int delta = 0;
  std::optional<Option> option;
  RewardSet rewards;
  double ground_truth = 0.0;
  /// Residual disparity after the action.
  double residual = 0.0;
};

/// Sample an action, move, re-encode, update the three dictionaries and the
/// parallel network. `state` advances to the post-action view; its encoding
/// is reused as the next step's input.
StepDiagnostics train_step_parallel(AgentModel& model, const StereoScene& scene, FixationState& state,
                                    bool fixation_final, Rng& rng, const AgentConfig& config);

/// Same loop for the hierarchical model. The selector learns every step from
/// the overall reward; only the selected bottom network learns, from its own
/// feature vector and reward channel.
StepDiagnostics train_step_hierarchical(AgentModel& model, const StereoScene& scene, FixationState& state,
                                        bool fixation_final, Rng& rng, const AgentConfig& config);

StepDiagnostics train_step(AgentModel& model, const StereoScene& scene, FixationState& state, bool fixation_final,
                           Rng& rng, const AgentConfig& config);

}  // namespace aec

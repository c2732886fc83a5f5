#include "aec/agent.hpp"

#include "aec/pyramid.hpp"

namespace aec {
namespace {

constexpr int kSelectorSlot = 0;

struct Moved {
  GazeState gaze;
  FeatureBundle bundle;
  RewardSet rewards;
};

// Executes the action, encodes the new view and lets the dictionaries learn
// from it. The returned encoding predates the dictionary update.
Moved move_and_encode(AgentModel& model, const StereoScene& scene, const GazeState& gaze, int delta,
                      const AgentConfig& config) {
  Moved m;
  m.gaze = apply_action(gaze, delta, config.limits);
  m.bundle = encode_pyramid(model.dictionaries, extract_pyramid(scene, m.gaze));
  m.rewards = compute_rewards(m.bundle);
  if (config.learn_dictionaries)
    for (Scale s : kScales) update_dictionary(model.dictionaries[index_of(s)], m.bundle[s]);
  return m;
}

std::array<double, 4> normalize_all(AgentModel& model, const RewardSet& r, const LearnerConfig& cfg) {
  return {model.normalizers[0].normalize(r.parallel, cfg), model.normalizers[1].normalize(r.foveal, cfg),
          model.normalizers[2].normalize(r.inner_peripheral, cfg),
          model.normalizers[3].normalize(r.outer_peripheral, cfg)};
}

StepDiagnostics finish(const StereoScene& scene, FixationState& state, Moved&& moved, int action_index) {
  StepDiagnostics d;
  d.before = state.gaze;
  d.after = moved.gaze;
  d.action_index = action_index;
  d.delta = kVergenceActions[action_index];
  d.rewards = moved.rewards;
  d.ground_truth = ground_truth_vergence(scene, moved.gaze);
  d.residual = d.ground_truth - moved.gaze.vergence;
  state.gaze = moved.gaze;
  state.features = assemble_features(moved.bundle);
  state.bundle = std::move(moved.bundle);
  return d;
}

}  // namespace

const char* to_string(ModelKind kind) { return kind == ModelKind::parallel ? "parallel" : "hierarchical"; }

ModelKind model_kind_from_string(const std::string& s) {
  if (s == "parallel") return ModelKind::parallel;
  if (s == "hierarchical") return ModelKind::hierarchical;
  throw std::invalid_argument("unknown model kind '" + s + "'");
}

PolicyNetwork& AgentModel::network(int slot) {
  return const_cast<PolicyNetwork&>(static_cast<const AgentModel&>(*this).network(slot));
}

const PolicyNetwork& AgentModel::network(int slot) const {
  if (slot < 0 || slot >= num_networks()) throw std::out_of_range("network slot out of range");
  if (kind == ModelKind::parallel) return parallel.net;
  return slot == kSelectorSlot ? hierarchical.top : hierarchical.bottom[slot - 1];
}

AgentModel make_agent(ModelKind kind, std::uint64_t seed, const AgentConfig& config) {
  AgentModel model;
  model.kind = kind;
  for (Scale s : kScales)
    model.dictionaries[index_of(s)] = init_dictionary(derive_seed(seed, {0x6469, static_cast<std::uint64_t>(index_of(s))}),
                                                      s, config.gassom);
  if (kind == ModelKind::parallel) {
    model.parallel = make_parallel_policy(config.temperature);
  } else {
    model.hierarchical = make_hierarchical_policy(config.temperature);
  }
  for (int slot = 0; slot < model.num_networks(); ++slot) {
    const PolicyNetwork& net = model.network(slot);
    model.critics.push_back(CriticState::zeros(net.outputs(), net.inputs()));
    model.update_counts.push_back(0);
  }
  return model;
}

FixationState observe(const AgentModel& model, const StereoScene& scene, const GazeState& gaze) {
  FixationState state;
  state.gaze = gaze;
  state.bundle = encode_pyramid(model.dictionaries, extract_pyramid(scene, gaze));
  state.features = assemble_features(state.bundle);
  return state;
}

FixationState begin_fixation(AgentModel& model, const StereoScene& scene, const GazeState& gaze) {
  for (CriticState& c : model.critics) c.reset_traces();
  return observe(model, scene, gaze);
}

StepDiagnostics train_step_parallel(AgentModel& model, const StereoScene& scene, FixationState& state,
                                    bool fixation_final, Rng& rng, const AgentConfig& config) {
  if (model.kind != ModelKind::parallel) throw std::invalid_argument("model is not a parallel model");
  const ParallelDecision decision = act_parallel(model.parallel, state.features, ActMode::sample, rng);
  Moved moved = move_and_encode(model, scene, state.gaze, decision.delta, config);
  const auto reward = normalize_all(model, moved.rewards, config.learner);
  const PooledFeatures next = assemble_features(moved.bundle);

  nac_step(model.parallel.net, model.critics[0], state.features.parallel, decision.action_index, reward[0],
           next.parallel, fixation_final, config.learner);
  ++model.update_counts[0];
  ++model.steps;
  return finish(scene, state, std::move(moved), decision.action_index);
}

StepDiagnostics train_step_hierarchical(AgentModel& model, const StereoScene& scene, FixationState& state,
                                        bool fixation_final, Rng& rng, const AgentConfig& config) {
  if (model.kind != ModelKind::hierarchical) throw std::invalid_argument("model is not a hierarchical model");
  const HierarchicalDecision decision = act_hierarchical(model.hierarchical, state.features, ActMode::sample, rng);
  Moved moved = move_and_encode(model, scene, state.gaze, decision.delta, config);
  const auto reward = normalize_all(model, moved.rewards, config.learner);
  const PooledFeatures next = assemble_features(moved.bundle);

  nac_step(model.hierarchical.top, model.critics[kSelectorSlot], state.features.overall(),
           static_cast<int>(decision.option), reward[static_cast<int>(Channel::parallel)], next.overall(),
           fixation_final, config.learner);
  ++model.update_counts[kSelectorSlot];

  const int o = static_cast<int>(decision.option);
  nac_step(model.hierarchical.bottom[o], model.critics[1 + o], state.features.of(decision.option),
           decision.action_index, reward[1 + o], next.of(decision.option), fixation_final, config.learner);
  ++model.update_counts[1 + o];
  ++model.steps;

  StepDiagnostics d = finish(scene, state, std::move(moved), decision.action_index);
  d.option = decision.option;
  return d;
}

StepDiagnostics train_step(AgentModel& model, const StereoScene& scene, FixationState& state, bool fixation_final,
                           Rng& rng, const AgentConfig& config) {
  return model.kind == ModelKind::parallel ? train_step_parallel(model, scene, state, fixation_final, rng, config)
                                           : train_step_hierarchical(model, scene, state, fixation_final, rng, config);
}

}  // namespace aec

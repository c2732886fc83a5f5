#include "aec/learner.hpp"

#include <algorithm>
#include <cmath>

namespace aec {
namespace {

// Mean error over valid patches with |i|, |j| <= radius, and the count used.
std::pair<double, int> mean_error(const ScaleCode& code, int radius) {
  double sum = 0.0;
  int count = 0;
  for (int i = -radius; i <= radius; ++i) {
    for (int j = -radius; j <= radius; ++j) {
      const int n = patch_index(i, j);
      if (!code.valid[n]) continue;
      sum += code.error[n];
      ++count;
    }
  }
  return {count > 0 ? sum / count : 0.0, count};
}

// Equal-weight average of the group means that have at least one valid patch.
double combine(std::initializer_list<std::pair<double, int>> groups) {
  double sum = 0.0;
  int used = 0;
  for (const auto& [mean, count] : groups) {
    if (count == 0) continue;
    sum += mean;
    ++used;
  }
  return used > 0 ? -sum / used : 0.0;
}

}  // namespace

double RewardSet::of(Option o) const {
  switch (o) {
    case Option::foveal: return foveal;
    case Option::inner_peripheral: return inner_peripheral;
    case Option::outer_peripheral: return outer_peripheral;
  }
  return foveal;
}

RewardSet compute_rewards(const FeatureBundle& bundle) {
  const ScaleCode& coarse = bundle[Scale::coarse];
  const ScaleCode& medium = bundle[Scale::medium];
  const ScaleCode& fine = bundle[Scale::fine];

  RewardSet r;
  // The parallel reward averages every valid patch of all three scales.
  double sum = 0.0;
  int count = 0;
  for (const ScaleCode* code : {&coarse, &medium, &fine}) {
    for (int n = 0; n < kPatchesPerScale; ++n) {
      if (!code->valid[n]) continue;
      sum += code->error[n];
      ++count;
    }
  }
  r.parallel = count > 0 ? -sum / count : 0.0;
  r.foveal = combine({mean_error(coarse, 0), mean_error(medium, 1), mean_error(fine, 3)});
  r.inner_peripheral = combine({mean_error(coarse, 1), mean_error(medium, 3)});
  r.outer_peripheral = combine({mean_error(coarse, 3)});
  return r;
}

CriticState CriticState::zeros(int outputs, int inputs) {
  return {Eigen::VectorXd::Zero(inputs), Eigen::MatrixXd::Zero(outputs, inputs), Eigen::VectorXd::Zero(inputs)};
}

double RewardNormalizer::normalize(double r, const LearnerConfig& cfg) {
  ++count;
  const double rate = std::max(cfg.reward_rate, 1.0 / static_cast<double>(count));
  if (count == 1) {
    mean = r;
    variance = 0.0;
  } else {
    const double diff = r - mean;
    mean += rate * diff;
    variance = (1.0 - rate) * (variance + rate * diff * diff);
  }
  return (r - mean) / std::sqrt(std::max(variance, cfg.variance_floor));
}

Eigen::MatrixXd compatible_features(const PolicyNetwork& net, const Eigen::Ref<const Eigen::VectorXd>& features,
                                    int action) {
  Eigen::VectorXd g = -action_distribution(net, features);
  g[action] += 1.0;
  return g * features.transpose() / net.temperature;
}

NacDiagnostics nac_step(PolicyNetwork& net, CriticState& critic, const Eigen::Ref<const Eigen::VectorXd>& features,
                        int action, double normalized_reward, const Eigen::Ref<const Eigen::VectorXd>& next_features,
                        bool terminal, const LearnerConfig& cfg) {
  NacDiagnostics diag;
  diag.value = critic.value.dot(features);
  const double bootstrap = terminal ? 0.0 : cfg.discount * critic.value.dot(next_features);
  const double delta = normalized_reward + bootstrap - diag.value;
  diag.td_error = delta;

  critic.value_trace = cfg.trace_decay * cfg.discount * critic.value_trace + features;
  critic.value += cfg.critic_rate * delta * critic.value_trace;

  // psi = g F^T / T with g = e_action - p, so psi . w = g . (w F) / T and the
  // Fisher-corrected step w += a (delta - psi . w) psi stays rank one.
  Eigen::VectorXd g = -action_distribution(net, features);
  g[action] += 1.0;
  const double psi_dot_w = g.dot(critic.advantage * features) / net.temperature;
  critic.advantage.noalias() += (cfg.advantage_rate * (delta - psi_dot_w) / net.temperature) * g * features.transpose();
  net.weights.noalias() += cfg.actor_rate * critic.advantage;

  if (!std::isfinite(delta) || !critic.value.allFinite() || !net.weights.allFinite())
    throw NumericalFault("actor-critic update produced non-finite state");
  return diag;
}

}  // namespace aec

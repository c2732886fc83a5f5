#pragma once

#include <array>

#include "aec/common.hpp"
#include "aec/gassom.hpp"
#include "aec/policy.hpp"

namespace aec {

struct LearnerConfig {
  double discount = 0.3;
  double trace_decay = 0.3;
  double critic_rate = 1e-2;
  double advantage_rate = 1e-2;
  double actor_rate = 2e-3;
  double reward_rate = 1e-3;
  double variance_floor = 1e-8;
};

/// Negated mean reconstruction errors of the patch groups each network sees.
/// All channels lie in [-1, 0]; the selector's reward equals `parallel`.
struct RewardSet {
  double parallel = 0.0;
  double foveal = 0.0;
  double inner_peripheral = 0.0;
  double outer_peripheral = 0.0;

  double overall() const { return parallel; }
  double of(Option o) const;
};

RewardSet compute_rewards(const FeatureBundle& bundle);

/// Linear critic and compatible-feature advantage weights of one network.
struct CriticState {
  Eigen::VectorXd value;       // D
  Eigen::MatrixXd advantage;   // A x D, same layout as the policy weights
  Eigen::VectorXd value_trace; // D

  static CriticState zeros(int outputs, int inputs);
  void reset_traces() { value_trace.setZero(); }
};

/// Running z-score of one reward channel. The first 1/rate samples use the
/// cumulative mean and variance; afterwards an exponential moving average.
struct RewardNormalizer {
  double mean = 0.0;
  double variance = 1.0;
  long count = 0;

  /// Folds r into the statistics and returns (r - mean) / sd.
  double normalize(double r, const LearnerConfig& cfg);
};

/// grad_W log pi(action | F) for the softmax-linear policy,
/// (e_action - p) F^T / T.
Eigen::MatrixXd compatible_features(const PolicyNetwork& net, const Eigen::Ref<const Eigen::VectorXd>& features,
                                    int action);

struct NacDiagnostics {
  double td_error = 0.0;
  double value = 0.0;
};

/// One natural actor-critic update with a TD(lambda) critic. `terminal`
/// drops the bootstrap term. `normalized_reward` must already be z-scored.
NacDiagnostics nac_step(PolicyNetwork& net, CriticState& critic, const Eigen::Ref<const Eigen::VectorXd>& features,
                        int action, double normalized_reward, const Eigen::Ref<const Eigen::VectorXd>& next_features,
                        bool terminal, const LearnerConfig& cfg);

}  // namespace aec

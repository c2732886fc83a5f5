#pragma once

#include <array>
#include <optional>
#include <span>

#include "aec/common.hpp"
#include "aec/gassom.hpp"

namespace aec {

/// Bottom-level options of the hierarchical model, in selector output order.
enum class Option : int { foveal = 0, inner_peripheral = 1, outer_peripheral = 2 };

const char* to_string(Option o);

inline constexpr int kPooledDim = 3 * kNumSubspaces;

/// Space-pooled, scale-concatenated energy vectors.
///   parallel          [coarse mean(49); medium mean(49); fine mean(49)]
///   foveal            [coarse center patch; medium mean(3x3); fine mean(49)]
///   inner_peripheral  [coarse mean(3x3); medium mean(49)]
///   outer_peripheral  coarse mean(49)
/// Means run over valid patches only; a pool with none is zero.
struct PooledFeatures {
  Eigen::VectorXd parallel;
  Eigen::VectorXd foveal;
  Eigen::VectorXd inner_peripheral;
  Eigen::VectorXd outer_peripheral;

  /// Input of the hierarchical selector; identical to the parallel vector.
  const Eigen::VectorXd& overall() const { return parallel; }
  const Eigen::VectorXd& of(Option o) const;
};

PooledFeatures assemble_features(const FeatureBundle& bundle);

/// Single-layer softmax policy: p = softmax(W F / T).
struct PolicyNetwork {
  Eigen::MatrixXd weights;
  double temperature = 1.0;

  static PolicyNetwork zeros(int outputs, int inputs, double temperature = 1.0);
  int outputs() const { return static_cast<int>(weights.rows()); }
  int inputs() const { return static_cast<int>(weights.cols()); }
};

/// Numerically stable softmax of activations / temperature.
Eigen::VectorXd softmax(const Eigen::Ref<const Eigen::VectorXd>& activations, double temperature = 1.0);

Eigen::VectorXd action_distribution(const PolicyNetwork& net, const Eigen::Ref<const Eigen::VectorXd>& features);

int sample_action(const Eigen::Ref<const Eigen::VectorXd>& p, Rng& rng);

/// Argmax of p. Ties go to the entry with the smallest tie_rank, then to
/// the lowest index. Without ranks, the lowest index wins.
int greedy_action(const Eigen::Ref<const Eigen::VectorXd>& p, std::span<const int> tie_rank = {});

/// Greedy vergence action: ties prefer the smallest |shift|.
int greedy_vergence_action(const Eigen::Ref<const Eigen::VectorXd>& p);

enum class ActMode { sample, greedy };

struct ParallelPolicy {
  PolicyNetwork net;
};

/// Index 0 of `bottom` is the foveal network, then inner and outer periphery.
struct HierarchicalPolicy {
  PolicyNetwork top;
  std::array<PolicyNetwork, kNumOptions> bottom;

  const PolicyNetwork& network(Option o) const { return bottom[static_cast<int>(o)]; }
};

ParallelPolicy make_parallel_policy(double temperature = 1.0);
HierarchicalPolicy make_hierarchical_policy(double temperature = 1.0);

struct ParallelDecision {
  int action_index = 0;
  int delta = 0;
  Eigen::VectorXd p;
};

struct HierarchicalDecision {
  int action_index = 0;
  int delta = 0;
  Option option = Option::foveal;
  Eigen::VectorXd p_top;
  std::array<Eigen::VectorXd, kNumOptions> p_bottom;
};

ParallelDecision act_parallel(const ParallelPolicy& policy, const PooledFeatures& features, ActMode mode, Rng& rng);

/// Both levels sample in ActMode::sample and are greedy in ActMode::greedy.
HierarchicalDecision act_hierarchical(const HierarchicalPolicy& policy, const PooledFeatures& features, ActMode mode,
                                      Rng& rng);

}  // namespace aec

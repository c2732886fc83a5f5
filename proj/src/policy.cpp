#include "aec/policy.hpp"

#include <cmath>
#include <cstdlib>
#include <string>

namespace aec {
namespace {

constexpr int kCoarse = static_cast<int>(Scale::coarse);
constexpr int kMedium = static_cast<int>(Scale::medium);
constexpr int kFine = static_cast<int>(Scale::fine);

// Mean energy over valid patches with |i|, |j| <= radius.
Eigen::VectorXd pool(const ScaleCode& code, int radius) {
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(kNumSubspaces);
  int count = 0;
  for (int i = -radius; i <= radius; ++i) {
    for (int j = -radius; j <= radius; ++j) {
      const int n = patch_index(i, j);
      if (!code.valid[n]) continue;
      sum += code.energy.col(n);
      ++count;
    }
  }
  return count > 0 ? Eigen::VectorXd(sum / count) : sum;
}

Eigen::VectorXd stack(std::initializer_list<Eigen::VectorXd> parts) {
  Eigen::Index n = 0;
  for (const auto& p : parts) n += p.size();
  Eigen::VectorXd out(n);
  Eigen::Index at = 0;
  for (const auto& p : parts) {
    out.segment(at, p.size()) = p;
    at += p.size();
  }
  return out;
}

const std::array<int, kNumActions> kMagnitudeRank = [] {
  std::array<int, kNumActions> rank{};
  for (int a = 0; a < kNumActions; ++a) rank[a] = std::abs(kVergenceActions[a]);
  return rank;
}();

int choose(const Eigen::VectorXd& p, ActMode mode, Rng& rng, bool vergence) {
  if (mode == ActMode::sample) return sample_action(p, rng);
  return vergence ? greedy_vergence_action(p) : greedy_action(p);
}

}  // namespace

const char* to_string(Option o) {
  switch (o) {
    case Option::foveal: return "F";
    case Option::inner_peripheral: return "IP";
    case Option::outer_peripheral: return "OP";
  }
  return "?";
}

const Eigen::VectorXd& PooledFeatures::of(Option o) const {
  switch (o) {
    case Option::foveal: return foveal;
    case Option::inner_peripheral: return inner_peripheral;
    case Option::outer_peripheral: return outer_peripheral;
  }
  return foveal;
}

PooledFeatures assemble_features(const FeatureBundle& bundle) {
  const ScaleCode& coarse = bundle.codes[kCoarse];
  const ScaleCode& medium = bundle.codes[kMedium];
  const ScaleCode& fine = bundle.codes[kFine];

  const Eigen::VectorXd coarse_all = pool(coarse, 3);
  const Eigen::VectorXd medium_all = pool(medium, 3);
  const Eigen::VectorXd fine_all = pool(fine, 3);

  PooledFeatures f;
  f.parallel = stack({coarse_all, medium_all, fine_all});
  f.foveal = stack({pool(coarse, 0), pool(medium, 1), fine_all});
  f.inner_peripheral = stack({pool(coarse, 1), medium_all});
  f.outer_peripheral = coarse_all;
  return f;
}

PolicyNetwork PolicyNetwork::zeros(int outputs, int inputs, double temperature) {
  if (!(temperature > 0.0)) throw std::invalid_argument("softmax temperature must be positive");
  return {Eigen::MatrixXd::Zero(outputs, inputs), temperature};
}

Eigen::VectorXd softmax(const Eigen::Ref<const Eigen::VectorXd>& activations, double temperature) {
  if (!activations.allFinite()) throw NumericalFault("non-finite policy activations");
  const Eigen::ArrayXd scaled = activations.array() / temperature;
  Eigen::ArrayXd e = (scaled - scaled.maxCoeff()).exp();
  return (e / e.sum()).matrix();
}

Eigen::VectorXd action_distribution(const PolicyNetwork& net, const Eigen::Ref<const Eigen::VectorXd>& features) {
  if (features.size() != net.weights.cols())
    throw std::invalid_argument("feature dimension " + std::to_string(features.size()) +
                                " does not match policy input " + std::to_string(net.weights.cols()));
  return softmax(net.weights * features, net.temperature);
}

int sample_action(const Eigen::Ref<const Eigen::VectorXd>& p, Rng& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double u = unit(rng);
  double acc = 0.0;
  for (Eigen::Index i = 0; i < p.size(); ++i) {
    acc += p[i];
    if (u < acc) return static_cast<int>(i);
  }
  // Rounding left u beyond the last partial sum; return the last nonzero entry.
  for (Eigen::Index i = p.size() - 1; i > 0; --i)
    if (p[i] > 0.0) return static_cast<int>(i);
  return 0;
}

int greedy_action(const Eigen::Ref<const Eigen::VectorXd>& p, std::span<const int> tie_rank) {
  int best = 0;
  for (int i = 1; i < p.size(); ++i) {
    if (p[i] > p[best]) {
      best = i;
    } else if (p[i] == p[best] && !tie_rank.empty() && tie_rank[i] < tie_rank[best]) {
      best = i;
    }
  }
  return best;
}

int greedy_vergence_action(const Eigen::Ref<const Eigen::VectorXd>& p) {
  return greedy_action(p, kMagnitudeRank);
}

ParallelPolicy make_parallel_policy(double temperature) {
  return {PolicyNetwork::zeros(kNumActions, kPooledDim, temperature)};
}

HierarchicalPolicy make_hierarchical_policy(double temperature) {
  HierarchicalPolicy h;
  h.top = PolicyNetwork::zeros(kNumOptions, kPooledDim, temperature);
  h.bottom[0] = PolicyNetwork::zeros(kNumActions, kPooledDim, temperature);
  h.bottom[1] = PolicyNetwork::zeros(kNumActions, 2 * kNumSubspaces, temperature);
  h.bottom[2] = PolicyNetwork::zeros(kNumActions, kNumSubspaces, temperature);
  return h;
}

ParallelDecision act_parallel(const ParallelPolicy& policy, const PooledFeatures& features, ActMode mode, Rng& rng) {
  ParallelDecision d;
  d.p = action_distribution(policy.net, features.parallel);
  d.action_index = choose(d.p, mode, rng, true);
  d.delta = kVergenceActions[d.action_index];
  return d;
}

HierarchicalDecision act_hierarchical(const HierarchicalPolicy& policy, const PooledFeatures& features, ActMode mode,
                                      Rng& rng) {
  HierarchicalDecision d;
  d.p_top = action_distribution(policy.top, features.overall());
  for (int o = 0; o < kNumOptions; ++o)
    d.p_bottom[o] = action_distribution(policy.bottom[o], features.of(static_cast<Option>(o)));
  d.option = static_cast<Option>(choose(d.p_top, mode, rng, false));
  d.action_index = choose(d.p_bottom[static_cast<int>(d.option)], mode, rng, true);
  d.delta = kVergenceActions[d.action_index];
  return d;
}

}  // namespace aec

#include "aec/gassom.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

#include "aec/environment.hpp"

namespace aec {
namespace {

void gram_schmidt(Eigen::Ref<Eigen::MatrixXd> b) {
  b.col(0).normalize();
  b.col(1) -= b.col(0).dot(b.col(1)) * b.col(0);
  // Second pass keeps the columns orthogonal to machine precision.
  b.col(1) -= b.col(0).dot(b.col(1)) * b.col(0);
  b.col(1).normalize();
}

// Energies, winners and errors from projections of unit-length patches.
void finish_code(ScaleCode& code) {
  const Eigen::Index n = code.projections.cols();
  code.energy.resize(kNumSubspaces, n);
  for (int k = 0; k < kNumSubspaces; ++k)
    code.energy.row(k) = code.projections.row(2 * k).array().square() + code.projections.row(2 * k + 1).array().square();
  for (Eigen::Index p = 0; p < n; ++p) {
    if (!code.valid[p]) {
      code.energy.col(p).setZero();
      code.winner[p] = 0;
      code.error[p] = 0.0;
      continue;
    }
    Eigen::Index best = 0;
    code.energy.col(p).maxCoeff(&best);  // first maximum wins ties
    code.winner[p] = static_cast<int>(best);
    code.error[p] = std::clamp(1.0 - code.energy(best, p), 0.0, 1.0);
  }
}

// Smooths responsibilities over the 18x18 map with a peak-1 Gaussian. The
// kernel is separable, so each patch's map is filtered along rows and columns.
Eigen::MatrixXd smooth_on_map(const Eigen::MatrixXd& resp, double sigma) {
  Eigen::Matrix<double, kSomSide, kSomSide> g;
  for (int a = 0; a < kSomSide; ++a)
    for (int b = 0; b < kSomSide; ++b) g(a, b) = std::exp(-0.5 * (a - b) * (a - b) / (sigma * sigma));
  Eigen::MatrixXd out(resp.rows(), resp.cols());
  for (Eigen::Index p = 0; p < resp.cols(); ++p) {
    // Subspace k sits at map row k / 18, column k % 18; the column vector
    // viewed column-major is the transposed map, and g is symmetric.
    Eigen::Map<const Eigen::Matrix<double, kSomSide, kSomSide>> in(resp.col(p).data());
    Eigen::Map<Eigen::Matrix<double, kSomSide, kSomSide>> dst(out.col(p).data());
    dst.noalias() = g * in * g;
  }
  return out;
}

UpdateDiagnostics apply_update(SubspaceDictionary& dict, const Eigen::MatrixXd& unit, const Eigen::MatrixXd& proj,
                               const Eigen::MatrixXd& energy) {
  UpdateDiagnostics diag;
  const Eigen::Index m = unit.cols();
  diag.patches = static_cast<int>(m);
  if (m == 0) {
    diag.orthonormality_error = dict.orthonormality_error();
    return diag;
  }

  double err = 0.0;
  for (Eigen::Index p = 0; p < m; ++p) err += 1.0 - energy.col(p).maxCoeff();
  diag.mean_error = err / static_cast<double>(m);

  // Responsibilities: softmax of energy / temperature over subspaces.
  const double tau = dict.config.responsibility_temperature;
  Eigen::MatrixXd resp(kNumSubspaces, m);
  for (Eigen::Index p = 0; p < m; ++p) {
    const double top = energy.col(p).maxCoeff();
    resp.col(p) = ((energy.col(p).array() - top) / tau).exp().matrix();
    resp.col(p) /= resp.col(p).sum();
  }
  const Eigen::MatrixXd smoothed = smooth_on_map(resp, dict.sigma);

  // dB_k = sum_p g_kp (x_p - B_k q_kp) q_kp^T with q_kp = B_k^T x_p.
  Eigen::MatrixXd weighted(m, 2 * kNumSubspaces);
  for (int k = 0; k < kNumSubspaces; ++k) {
    weighted.col(2 * k) = (smoothed.row(k).array() * proj.row(2 * k).array()).matrix().transpose();
    weighted.col(2 * k + 1) = (smoothed.row(k).array() * proj.row(2 * k + 1).array()).matrix().transpose();
  }
  Eigen::MatrixXd delta(kPatchDim, 2 * kNumSubspaces);
  delta.noalias() = unit * weighted;
  for (int k = 0; k < kNumSubspaces; ++k) {
    Eigen::Matrix2d s;
    for (int a = 0; a < 2; ++a)
      for (int b = 0; b < 2; ++b) s(a, b) = weighted.col(2 * k + a).dot(proj.row(2 * k + b).transpose());
    auto d = delta.middleCols(2 * k, 2);
    const auto b = dict.basis(k);
    d.col(0) -= s(0, 0) * b.col(0) + s(1, 0) * b.col(1);
    d.col(1) -= s(0, 1) * b.col(0) + s(1, 1) * b.col(1);
  }

  if (dict.eta != 0.0) {
    dict.bases.noalias() += dict.eta * delta;
    if (!dict.bases.allFinite()) throw NumericalFault("dictionary update produced non-finite bases");
    orthonormalize(dict);
  }
  ++dict.step_count;
  dict.apply_schedule();
  diag.orthonormality_error = dict.orthonormality_error();
  return diag;
}

}  // namespace

void SubspaceDictionary::apply_schedule() {
  const double progress =
      config.anneal_steps > 0 ? std::min(1.0, static_cast<double>(step_count) / config.anneal_steps) : 1.0;
  sigma = config.sigma_initial * std::pow(config.sigma_final / config.sigma_initial, progress);
  eta = config.eta_initial * (config.eta_initial > 0 ? std::pow(config.eta_final / config.eta_initial, progress) : 0.0);
}

double SubspaceDictionary::orthonormality_error() const {
  double worst = 0.0;
  for (int k = 0; k < kNumSubspaces; ++k) {
    const auto b = basis(k);
    worst = std::max({worst, std::abs(b.col(0).squaredNorm() - 1.0), std::abs(b.col(1).squaredNorm() - 1.0),
                      std::abs(b.col(0).dot(b.col(1)))});
  }
  return worst;
}

void orthonormalize(SubspaceDictionary& dict) {
  for (int k = 0; k < kNumSubspaces; ++k) gram_schmidt(dict.basis(k));
}

SubspaceDictionary init_dictionary(std::uint64_t seed, Scale scale, const GassomConfig& config) {
  SubspaceDictionary dict;
  dict.scale = scale;
  dict.config = config;
  dict.bases.resize(kPatchDim, 2 * kNumSubspaces);
  Rng rng = make_stream(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  // Column-major fill: subspace by subspace.
  for (Eigen::Index i = 0; i < dict.bases.size(); ++i) dict.bases.data()[i] = normal(rng);
  orthonormalize(dict);
  dict.apply_schedule();
  return dict;
}

EncodingResult encode(const SubspaceDictionary& dict, const Eigen::Ref<const Eigen::VectorXd>& x) {
  if (x.size() != kPatchDim) throw std::invalid_argument("patch vector must have 200 entries");
  ScaleCode code;
  const double norm = x.norm();
  code.valid[0] = norm > 0.0;
  Eigen::VectorXd unit = code.valid[0] ? Eigen::VectorXd(x / norm) : Eigen::VectorXd::Zero(kPatchDim);
  code.projections = dict.bases.transpose() * unit;
  finish_code(code);
  return {code.energy.col(0), code.winner[0], code.error[0], code.valid[0]};
}

ScaleCode encode_grid(const SubspaceDictionary& dict, const PatchGrid& grid) {
  ScaleCode code;
  code.unit_patches = grid.patches;
  for (int p = 0; p < kPatchesPerScale; ++p) {
    const double norm = grid.patches.col(p).norm();
    code.valid[p] = grid.valid[p] && norm > 0.0;
    if (code.valid[p])
      code.unit_patches.col(p) /= norm;
    else
      code.unit_patches.col(p).setZero();
  }
  code.projections.noalias() = dict.bases.transpose() * code.unit_patches;
  finish_code(code);
  return code;
}

FeatureBundle encode_pyramid(const DictionarySet& dicts, const PyramidInput& pyramid) {
  FeatureBundle bundle;
  for (Scale s : kScales) bundle[s] = encode_grid(dicts[index_of(s)], pyramid[s]);
  return bundle;
}

UpdateDiagnostics update_dictionary(SubspaceDictionary& dict, const Eigen::Ref<const Eigen::MatrixXd>& batch) {
  if (batch.rows() != kPatchDim) throw std::invalid_argument("batch rows must equal 200");
  std::vector<Eigen::Index> keep;
  for (Eigen::Index p = 0; p < batch.cols(); ++p)
    if (batch.col(p).squaredNorm() > 0.0) keep.push_back(p);
  Eigen::MatrixXd unit(kPatchDim, static_cast<Eigen::Index>(keep.size()));
  for (std::size_t i = 0; i < keep.size(); ++i) unit.col(i) = batch.col(keep[i]).normalized();
  const Eigen::MatrixXd proj = dict.bases.transpose() * unit;
  Eigen::MatrixXd energy(kNumSubspaces, unit.cols());
  for (int k = 0; k < kNumSubspaces; ++k)
    energy.row(k) = proj.row(2 * k).array().square() + proj.row(2 * k + 1).array().square();
  return apply_update(dict, unit, proj, energy);
}

UpdateDiagnostics update_dictionary(SubspaceDictionary& dict, const ScaleCode& code) {
  std::vector<Eigen::Index> keep;
  for (int p = 0; p < kPatchesPerScale; ++p)
    if (code.valid[p]) keep.push_back(p);
  if (static_cast<Eigen::Index>(keep.size()) == code.unit_patches.cols())
    return apply_update(dict, code.unit_patches, code.projections, code.energy);
  const auto n = static_cast<Eigen::Index>(keep.size());
  Eigen::MatrixXd unit(kPatchDim, n), proj(2 * kNumSubspaces, n), energy(kNumSubspaces, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    unit.col(i) = code.unit_patches.col(keep[i]);
    proj.col(i) = code.projections.col(keep[i]);
    energy.col(i) = code.energy.col(keep[i]);
  }
  return apply_update(dict, unit, proj, energy);
}

TuningPoint probe_disparity_tuning(const SubspaceDictionary& dict, int disparity, int n_probes, std::uint64_t seed) {
  if (std::abs(disparity) > kPatchSide - 1) throw std::invalid_argument("probe disparity must satisfy |d| <= 9");
  if (n_probes <= 0) throw std::invalid_argument("n_probes must be positive");

  // The texture and probe locations depend on the seed only, so every
  // disparity in a sweep sees the same left-eye patches.
  Rng rng = make_stream(seed, {0x7475});
  constexpr int kSide = 128;
  const Image texture = make_texture(kSide, kSide, TextureParams{}, rng);
  std::uniform_int_distribution<int> pos(0, kSide - kPatchSide);

  TuningPoint point;
  point.disparity = disparity;
  point.mean_energy = Eigen::VectorXd::Zero(kNumSubspaces);
  Eigen::MatrixXd batch(kPatchDim, n_probes);
  for (int n = 0; n < n_probes; ++n) {
    const int top = pos(rng);
    const int left = pos(rng);
    auto x = batch.col(n);
    for (int r = 0; r < kPatchSide; ++r) {
      for (int c = 0; c < kPatchSide; ++c) {
        const int shifted = ((c + disparity) % kPatchSide + kPatchSide) % kPatchSide;
        x(r * kPatchSide + c) = texture(top + r, left + c);
        x(kPatchPixels + r * kPatchSide + c) = texture(top + r, left + shifted);
      }
    }
    x.head(kPatchPixels).array() -= x.head(kPatchPixels).mean();
    x.tail(kPatchPixels).array() -= x.tail(kPatchPixels).mean();
    const double var = x.squaredNorm() / kPatchDim;
    if (var >= kMinPatchVariance) x /= std::sqrt(var);
  }

  double err = 0.0;
  int counted = 0;
  for (int n = 0; n < n_probes; ++n) {
    const EncodingResult r = encode(dict, batch.col(n));
    if (!r.valid) continue;
    point.mean_energy += r.energy;
    err += r.error;
    ++counted;
  }
  if (counted > 0) {
    point.mean_energy /= counted;
    point.mean_error = err / counted;
  }
  return point;
}

SubspaceDictionary make_quadrature_dictionary(int preferred_disparity, Scale scale) {
  struct Mode {
    int kx, ky;
  };
  std::vector<Mode> modes;
  for (int ky = 0; ky < kPatchSide; ++ky) {
    for (int kx = 0; kx < kPatchSide; ++kx) {
      const int cx = (kPatchSide - kx) % kPatchSide;
      const int cy = (kPatchSide - ky) % kPatchSide;
      if (cx == kx && cy == ky) continue;  // real-only modes have no quadrature partner
      if (ky * kPatchSide + kx < cy * kPatchSide + cx) modes.push_back({kx, ky});
    }
  }

  SubspaceDictionary dict;
  dict.scale = scale;
  dict.config.eta_initial = 0.0;
  dict.config.eta_final = 0.0;
  dict.bases.resize(kPatchDim, 2 * kNumSubspaces);
  const double w = 2.0 * std::numbers::pi / kPatchSide;
  for (int k = 0; k < kNumSubspaces; ++k) {
    const Mode m = modes[k % modes.size()];
    auto b = dict.basis(k);
    for (int r = 0; r < kPatchSide; ++r) {
      for (int c = 0; c < kPatchSide; ++c) {
        const double phase_left = w * (m.kx * c + m.ky * r);
        const double phase_right = w * (m.kx * (c + preferred_disparity) + m.ky * r);
        b(r * kPatchSide + c, 0) = std::cos(phase_left);
        b(r * kPatchSide + c, 1) = std::sin(phase_left);
        b(kPatchPixels + r * kPatchSide + c, 0) = std::cos(phase_right);
        b(kPatchPixels + r * kPatchSide + c, 1) = std::sin(phase_right);
      }
    }
  }
  orthonormalize(dict);
  dict.apply_schedule();
  return dict;
}

}  // namespace aec

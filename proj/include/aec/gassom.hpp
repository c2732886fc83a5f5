#pragma once

#include <array>
#include <cstdint>

#include "aec/common.hpp"
#include "aec/pyramid.hpp"

namespace aec {

/// Annealing schedule and responsibility sharpness of the subspace map.
struct GassomConfig {
  double responsibility_temperature = 0.1;
  double sigma_initial = 3.0;
  double sigma_final = 0.5;
  double eta_initial = 5e-3;
  double eta_final = 5e-4;
  /// Steps over which sigma and eta decay geometrically to their floors.
  long anneal_steps = 50000;
};

/// One dictionary of 324 two-dimensional subspaces of R^200 laid out on an
/// 18x18 map. Columns 2k and 2k+1 of `bases` span subspace k.
struct SubspaceDictionary {
  Scale scale = Scale::fine;
  Eigen::MatrixXd bases;
  GassomConfig config;
  double sigma = 0.0;
  double eta = 0.0;
  long step_count = 0;

  auto basis(int k) const { return bases.middleCols(2 * k, kSubspaceDim); }
  auto basis(int k) { return bases.middleCols(2 * k, kSubspaceDim); }

  /// Recomputes sigma and eta from step_count.
  void apply_schedule();

  /// Largest |B_k^T B_k - I| entry over all subspaces.
  double orthonormality_error() const;
};

SubspaceDictionary init_dictionary(std::uint64_t seed, Scale scale = Scale::fine, const GassomConfig& config = {});

/// Orthonormalizes the two columns of every subspace in place.
void orthonormalize(SubspaceDictionary& dict);

/// Encoding of a single patch. The input is scaled to unit length first, so
/// energies are fractions of the patch energy and error = 1 - energy[winner].
struct EncodingResult {
  Eigen::VectorXd energy;
  int winner = 0;
  double error = 0.0;
  bool valid = false;
};

EncodingResult encode(const SubspaceDictionary& dict, const Eigen::Ref<const Eigen::VectorXd>& x);

/// Encodings of the 49 patches of one scale, one column per patch.
struct ScaleCode {
  Eigen::MatrixXd energy;       // 324 x 49
  Eigen::MatrixXd projections;  // 648 x 49, B^T x for unit-length x
  Eigen::MatrixXd unit_patches; // 200 x 49, valid patches scaled to unit length
  std::array<int, kPatchesPerScale> winner{};
  std::array<double, kPatchesPerScale> error{};
  std::array<bool, kPatchesPerScale> valid{};
};

struct FeatureBundle {
  std::array<ScaleCode, kNumScales> codes;

  const ScaleCode& operator[](Scale s) const { return codes[index_of(s)]; }
  ScaleCode& operator[](Scale s) { return codes[index_of(s)]; }
};

using DictionarySet = std::array<SubspaceDictionary, kNumScales>;

ScaleCode encode_grid(const SubspaceDictionary& dict, const PatchGrid& grid);

FeatureBundle encode_pyramid(const DictionarySet& dicts, const PyramidInput& pyramid);

struct UpdateDiagnostics {
  int patches = 0;
  double mean_error = 0.0;  // before the update
  double orthonormality_error = 0.0;
};

/// One online update from a batch of patches (one per column). Zero columns
/// are skipped. Throws NumericalFault when the update goes non-finite.
UpdateDiagnostics update_dictionary(SubspaceDictionary& dict, const Eigen::Ref<const Eigen::MatrixXd>& batch);

/// Same update reusing an encoding of the batch made with the current bases.
UpdateDiagnostics update_dictionary(SubspaceDictionary& dict, const ScaleCode& code);

struct TuningPoint {
  int disparity = 0;
  Eigen::VectorXd mean_energy;
  double mean_error = 0.0;
};

/// Encodes n_probes fine-scale binocular patches whose right half is the
/// left half circularly shifted by `disparity` pixels
/// (right(r, c) = left(r, (c + disparity) mod 10)) and averages the result.
TuningPoint probe_disparity_tuning(const SubspaceDictionary& dict, int disparity, int n_probes, std::uint64_t seed);

/// Binocular quadrature dictionary built from the 48 conjugate pairs of 2-D
/// Fourier modes of a 10x10 patch. The right-eye half of every basis vector
/// is the left-eye half shifted by `preferred_disparity`, so each subspace
/// captures the most energy of patches carrying exactly that disparity.
SubspaceDictionary make_quadrature_dictionary(int preferred_disparity, Scale scale = Scale::fine);

}  // namespace aec

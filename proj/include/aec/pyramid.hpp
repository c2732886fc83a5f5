#pragma once

#include <array>

#include "aec/common.hpp"
#include "aec/environment.hpp"

namespace aec {

/// The 7x7 grid of binocular patches cut from one scale's 40x40 windows.
/// Column n of `patches` is patch_index(i, j): left-eye pixels (row-major)
/// followed by right-eye pixels. Valid patches have zero mean per eye and
/// unit population variance over all 200 values; invalid ones are zero.
struct PatchGrid {
  Scale scale = Scale::fine;
  Eigen::MatrixXd patches = Eigen::MatrixXd::Zero(kPatchDim, kPatchesPerScale);
  std::array<bool, kPatchesPerScale> valid{};

  int valid_count() const;
};

struct PyramidInput {
  std::array<PatchGrid, kNumScales> grids;

  const PatchGrid& operator[](Scale s) const { return grids[index_of(s)]; }
  PatchGrid& operator[](Scale s) { return grids[index_of(s)]; }
};

struct WindowPair {
  Image left;
  Image right;
};

/// Variance below which a patch is treated as featureless.
inline constexpr double kMinPatchVariance = 1e-12;

/// Block-averages the (40 * factor)-pixel square centered at (row, col)
/// down to 40x40. The square spans [center - 20 * factor, center + 20 * factor).
Image extract_window(const Image& source, int row, int col, Scale scale);

/// Windows for one scale. The right window is centered at right_col.
WindowPair extract_windows(const Image& left, const Image& right, int row, int left_col, int right_col,
                           Scale scale);

PatchGrid cut_and_normalize(const Image& window_left, const Image& window_right, Scale scale = Scale::fine);

/// All three scales; the right-eye windows are centered at
/// (fixation.row, fixation.col - vergence).
PyramidInput extract_pyramid(const StereoScene& scene, const GazeState& gaze);

PyramidInput extract_pyramid(const Image& left, const Image& right, int row, int left_col, int right_col);

}  // namespace aec

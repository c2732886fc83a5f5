#include "aec/pyramid.hpp"

#include <cmath>
#include <string>

namespace aec {

int PatchGrid::valid_count() const {
  int n = 0;
  for (bool v : valid) n += v;
  return n;
}

Image extract_window(const Image& source, int row, int col, Scale scale) {
  const int f = downsample_factor(scale);
  const int half = kWindowSide / 2 * f;
  const int top = row - half;
  const int left = col - half;
  if (top < 0 || left < 0 || top + 2 * half > source.rows() || left + 2 * half > source.cols())
    throw std::out_of_range("subwindow at (" + std::to_string(row) + ", " + std::to_string(col) +
                            ") leaves the image");
  if (f == 1) return source.block(top, left, kWindowSide, kWindowSide);

  Image window(kWindowSide, kWindowSide);
  const double norm = 1.0 / (f * f);
  for (int r = 0; r < kWindowSide; ++r)
    for (int c = 0; c < kWindowSide; ++c) window(r, c) = source.block(top + r * f, left + c * f, f, f).sum() * norm;
  return window;
}

WindowPair extract_windows(const Image& left, const Image& right, int row, int left_col, int right_col,
                           Scale scale) {
  return {extract_window(left, row, left_col, scale), extract_window(right, row, right_col, scale)};
}

PatchGrid cut_and_normalize(const Image& window_left, const Image& window_right, Scale scale) {
  if (window_left.rows() != kWindowSide || window_left.cols() != kWindowSide || window_right.rows() != kWindowSide ||
      window_right.cols() != kWindowSide)
    throw std::invalid_argument("patch windows must be 40x40");

  PatchGrid grid;
  grid.scale = scale;
  for (int i = -3; i <= 3; ++i) {
    for (int j = -3; j <= 3; ++j) {
      const int n = patch_index(i, j);
      const int top = (i + 3) * kPatchStride;
      const int left = (j + 3) * kPatchStride;
      auto x = grid.patches.col(n);
      for (int r = 0; r < kPatchSide; ++r) {
        for (int c = 0; c < kPatchSide; ++c) {
          x(r * kPatchSide + c) = window_left(top + r, left + c);
          x(kPatchPixels + r * kPatchSide + c) = window_right(top + r, left + c);
        }
      }
      x.head(kPatchPixels).array() -= x.head(kPatchPixels).mean();
      x.tail(kPatchPixels).array() -= x.tail(kPatchPixels).mean();
      const double var = x.squaredNorm() / kPatchDim;
      if (var < kMinPatchVariance) {
        x.setZero();
        grid.valid[n] = false;
      } else {
        x /= std::sqrt(var);
        grid.valid[n] = true;
      }
    }
  }
  return grid;
}

PyramidInput extract_pyramid(const Image& left, const Image& right, int row, int left_col, int right_col) {
  PyramidInput pyramid;
  for (Scale s : kScales) {
    const WindowPair w = extract_windows(left, right, row, left_col, right_col, s);
    pyramid[s] = cut_and_normalize(w.left, w.right, s);
  }
  return pyramid;
}

PyramidInput extract_pyramid(const StereoScene& scene, const GazeState& gaze) {
  return extract_pyramid(scene.left, scene.right, gaze.fixation.row, gaze.fixation.col,
                         gaze.fixation.col - gaze.vergence);
}

}  // namespace aec

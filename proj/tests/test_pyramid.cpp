#include "doctest.h"

#include "aec/pyramid.hpp"
#include "support.hpp"

using namespace aec;
using aec::testing::plane_scene;

namespace {

void check_normalized(const PatchGrid& g) {
  for (int n = 0; n < kPatchesPerScale; ++n) {
    if (!g.valid[n]) continue;
    const auto x = g.patches.col(n);
    REQUIRE(std::abs(x.head(kPatchPixels).mean()) < 1e-9);
    REQUIRE(std::abs(x.tail(kPatchPixels).mean()) < 1e-9);
    REQUIRE(std::abs(x.squaredNorm() / kPatchDim - 1.0) < 1e-6);
  }
}

// Raw (unnormalized) left and right pixels of patch (i, j) of a window pair.
std::pair<Eigen::ArrayXXd, Eigen::ArrayXXd> raw_patch(const WindowPair& w, int i, int j) {
  const int top = (i + 3) * kPatchStride, left = (j + 3) * kPatchStride;
  return {w.left.block(top, left, kPatchSide, kPatchSide), w.right.block(top, left, kPatchSide, kPatchSide)};
}

}  // namespace

TEST_SUITE("pyramid") {
  TEST_CASE("zero disparity and zero vergence give identical eye halves") {
    const StereoScene s = plane_scene(0);
    const PyramidInput p = extract_pyramid(s, {{120, 120}, 0});
    for (Scale sc : kScales) {
      CHECK(p[sc].valid_count() == kPatchesPerScale);
      check_normalized(p[sc]);
      const WindowPair w = extract_windows(s.left, s.right, 120, 120, 120, sc);
      CHECK((w.left == w.right).all());
      for (int n = 0; n < kPatchesPerScale; ++n)
        REQUIRE((p[sc].patches.col(n).head(kPatchPixels) - p[sc].patches.col(n).tail(kPatchPixels)).cwiseAbs().maxCoeff() < 1e-12);
    }
  }

  TEST_CASE("vergence equal to the plane disparity fuses the fine scale") {
    const StereoScene s = plane_scene(4);
    const PyramidInput p = extract_pyramid(s, {{118, 121}, 4});
    const WindowPair w = extract_windows(s.left, s.right, 118, 121, 121 - 4, Scale::fine);
    CHECK((w.left == w.right).all());
    for (int n = 0; n < kPatchesPerScale; ++n) {
      const auto x = p[Scale::fine].patches.col(n);
      REQUIRE((x.head(kPatchPixels) - x.tail(kPatchPixels)).cwiseAbs().maxCoeff() < 1e-12);
    }
  }

  TEST_CASE("unverged plane shifts fine patches by d and coarse patches by d/4") {
    const StereoScene s = plane_scene(4);
    const int row = 120, col = 120;
    const WindowPair fine = extract_windows(s.left, s.right, row, col, col, Scale::fine);
    const WindowPair coarse = extract_windows(s.left, s.right, row, col, col, Scale::coarse);
    // right(r, c) = left(r, c + d): the right window is the left one moved by d.
    CHECK((fine.right.leftCols(kWindowSide - 4) == fine.left.rightCols(kWindowSide - 4)).all());
    CHECK((coarse.right.leftCols(kWindowSide - 1) == coarse.left.rightCols(kWindowSide - 1)).all());
    const auto [l, r] = raw_patch(fine, 0, 0);
    const auto [l2, r2] = raw_patch(extract_windows(s.left, s.right, row, col + 4, col + 4, Scale::fine), 0, 0);
    CHECK((r == l2).all());
  }

  TEST_CASE("windows are block averages of the source") {
    const StereoScene s = plane_scene(0, 21);
    const Image coarse = extract_window(s.left, 120, 120, Scale::coarse);
    const Image medium = extract_window(s.left, 120, 120, Scale::medium);
    CHECK(coarse.rows() == kWindowSide);
    CHECK(std::abs(coarse(0, 0) - s.left.block(40, 40, 4, 4).mean()) < 1e-15);
    CHECK(std::abs(medium(5, 7) - s.left.block(80 + 10, 80 + 14, 2, 2).mean()) < 1e-15);
    // Averaging a 2x2 block of medium pixels equals the coarse pixel over the same region.
    const Image medium_wide = extract_window(s.left, 120, 120, Scale::medium);
    const Image coarse_inner = extract_window(s.left, 120, 120, Scale::coarse);
    CHECK(std::abs(medium_wide.block(10, 10, 2, 2).mean() - coarse_inner(15, 15)) < 1e-12);
  }

  TEST_CASE("out-of-bounds windows are a hard fault") {
    const StereoScene s = plane_scene(0);
    CHECK_THROWS_AS(extract_window(s.left, 50, 120, Scale::coarse), std::out_of_range);
    CHECK_NOTHROW(extract_window(s.left, 80, 80, Scale::coarse));
    CHECK_THROWS_AS(extract_window(s.left, 79, 80, Scale::coarse), std::out_of_range);
  }

  TEST_CASE("constant windows yield only invalid zero patches") {
    const Image flat = Image::Constant(kWindowSide, kWindowSide, 0.4);
    const PatchGrid g = cut_and_normalize(flat, flat);
    CHECK(g.valid_count() == 0);
    CHECK(g.patches.isZero(0.0));
  }

  TEST_CASE("a patch is invalid only when both eyes are flat") {
    Image left = Image::Constant(kWindowSide, kWindowSide, 0.4);
    Image right = left;
    right(2, 2) = 0.9;  // inside patch (-3, -3) only
    const PatchGrid g = cut_and_normalize(left, right);
    CHECK(g.valid[patch_index(-3, -3)]);
    CHECK(g.valid_count() == 1);
    check_normalized(g);
  }

  TEST_CASE("grid indexing follows the stride-5 layout") {
    Image left(kWindowSide, kWindowSide), right(kWindowSide, kWindowSide);
    for (int r = 0; r < kWindowSide; ++r)
      for (int c = 0; c < kWindowSide; ++c) {
        left(r, c) = r * 100 + c;
        right(r, c) = -(r * 100 + c) * 0.5 + (c % 3);
      }
    const PatchGrid g = cut_and_normalize(left, right);
    CHECK(patch_index(-3, -3) == 0);
    CHECK(patch_index(0, 0) == 24);
    CHECK(patch_index(3, 3) == 48);
    // Re-cut patch (1, -2) by hand and normalize the same way.
    Eigen::VectorXd x(kPatchDim);
    for (int r = 0; r < kPatchSide; ++r)
      for (int c = 0; c < kPatchSide; ++c) {
        x(r * kPatchSide + c) = left(20 + r, 5 + c);
        x(kPatchPixels + r * kPatchSide + c) = right(20 + r, 5 + c);
      }
    x.head(kPatchPixels).array() -= x.head(kPatchPixels).mean();
    x.tail(kPatchPixels).array() -= x.tail(kPatchPixels).mean();
    x /= std::sqrt(x.squaredNorm() / kPatchDim);
    CHECK((g.patches.col(patch_index(1, -2)) - x).norm() < 1e-12);
  }

  TEST_CASE("normalization is invariant to gain and offset") {
    const StereoScene s = plane_scene(3, 11);
    const WindowPair w = extract_windows(s.left, s.right, 120, 120, 118, Scale::fine);
    const PatchGrid a = cut_and_normalize(w.left, w.right);
    const PatchGrid b = cut_and_normalize(w.left * 3.7 + 0.25, w.right * 3.7 + 0.25);
    CHECK((a.patches - b.patches).cwiseAbs().maxCoeff() < 1e-6);
  }

  TEST_CASE("translating both windows by five pixels shifts the patch index") {
    const StereoScene s = plane_scene(2, 12);
    const WindowPair w0 = extract_windows(s.left, s.right, 120, 120, 120, Scale::fine);
    const WindowPair w1 = extract_windows(s.left, s.right, 120, 125, 125, Scale::fine);
    const PatchGrid a = cut_and_normalize(w0.left, w0.right);
    const PatchGrid b = cut_and_normalize(w1.left, w1.right);
    for (int i = -3; i <= 3; ++i)
      for (int j = -2; j <= 3; ++j)
        REQUIRE((a.patches.col(patch_index(i, j)) - b.patches.col(patch_index(i, j - 1))).norm() < 1e-12);
  }
}

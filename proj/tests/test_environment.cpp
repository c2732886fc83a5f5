#include "doctest.h"

#include <fstream>

#include "aec/environment.hpp"
#include "aec/image_io.hpp"
#include "aec/pyramid.hpp"
#include "support.hpp"

using namespace aec;
using aec::testing::kSmallSide;
using aec::testing::plane_scene;
using aec::testing::TempDir;

namespace {

// Normalized cross-correlation of the 10x10 left block at (r, c) against
// right blocks shifted by every candidate disparity; returns the best shift.
int best_shift(const StereoScene& s, int r, int c, int range) {
  auto block = [](const Image& img, int r0, int c0) {
    Eigen::ArrayXXd b = img.block(r0, c0, 10, 10);
    b -= b.mean();
    return Eigen::ArrayXXd(b / std::sqrt((b * b).sum()));
  };
  const Eigen::ArrayXXd left = block(s.left, r, c);
  int best = 0;
  double best_score = -2.0;
  for (int d = -range; d <= range; ++d) {
    const double score = (left * block(s.right, r, c - d)).sum();
    if (score > best_score) {
      best_score = score;
      best = d;
    }
  }
  return best;
}

SceneSpec conflict_spec() {
  SceneSpec spec;
  spec.kind = SceneKind::conflict;
  spec.rows = 320;
  spec.cols = 320;
  spec.foreground_disparity = 6;
  spec.background_disparity = -6;
  spec.foreground_extent = 40;
  spec.anchor = PixelPos{160, 160};
  return spec;
}

}  // namespace

TEST_SUITE("environment") {
  TEST_CASE("zero-disparity plane has identical eyes") {
    const StereoScene s = plane_scene(0);
    CHECK((s.disparity == 0.0).all());
    CHECK((s.left == s.right).all());
    CHECK(s.left.minCoeff() >= 0.0);
    CHECK(s.left.maxCoeff() <= 1.0);
  }

  TEST_CASE("fronto-parallel plane satisfies the rendering constraint") {
    const StereoScene s = plane_scene(5);
    CHECK((s.disparity == 5.0).all());
    for (int r = 0; r < s.rows(); r += 7)
      for (int c = 5; c < s.cols(); ++c) REQUIRE(s.right(r, c - 5) == s.left(r, c));
  }

  TEST_CASE("every 10x10 region of a texture has variance") {
    const StereoScene s = plane_scene(0, 17);
    for (int r = 0; r + 10 <= s.rows(); r += 10) {
      for (int c = 0; c + 10 <= s.cols(); c += 10) {
        const Eigen::ArrayXXd b = s.left.block(r, c, 10, 10);
        REQUIRE((b - b.mean()).square().mean() > 1e-6);
      }
    }
  }

  TEST_CASE("conflict scene disparity map and cross-correlation agree") {
    const StereoScene s = generate_scene(conflict_spec(), 3);
    REQUIRE(s.anchor.has_value());
    for (int r = 0; r < s.rows(); ++r) {
      for (int c = 0; c < s.cols(); ++c) {
        const bool inside = r >= 120 && r < 200 && c >= 120 && c < 200;
        REQUIRE(s.disparity(r, c) == (inside ? 6.0 : -6.0));
      }
    }
    // Blocks well inside the foreground and well inside the background.
    for (int r : {130, 150, 180})
      for (int c : {130, 155, 180}) CHECK(best_shift(s, r, c, 10) == 6);
    for (int r : {20, 60, 260})
      for (int c : {30, 70, 250}) CHECK(best_shift(s, r, c, 10) == -6);
  }

  TEST_CASE("conflict scene renders visible pixels exactly") {
    const StereoScene s = generate_scene(conflict_spec(), 4);
    auto in_square = [](int r, int c) { return r >= 120 && r < 200 && c >= 120 && c < 200; };
    long checked = 0;
    for (int r = 0; r < s.rows(); ++r) {
      for (int c = 0; c < s.cols(); ++c) {
        const int d = static_cast<int>(s.disparity(r, c));
        const int rc = c - d;
        if (rc < 0 || rc >= s.cols()) continue;
        // A background point is hidden when the foreground covers its right-eye pixel.
        if (d == -6 && in_square(r, rc + 6)) continue;
        REQUIRE(s.right(r, rc) == s.left(r, c));
        ++checked;
      }
    }
    CHECK(checked > 300 * 300);
  }

  TEST_CASE("generation is deterministic in the seed") {
    CHECK((plane_scene(3, 9).left == plane_scene(3, 9).left).all());
    CHECK(!(plane_scene(3, 9).left == plane_scene(3, 10).left).all());
  }

  TEST_CASE("invalid specs are rejected") {
    SceneSpec spec;
    spec.rows = spec.cols = kSmallSide;
    spec.background_disparity = 25;
    CHECK_THROWS_AS(generate_scene(spec, 1), std::invalid_argument);
    spec.background_disparity = 0;
    spec.rows = minimum_scene_side({}) - 1;
    CHECK_THROWS_AS(generate_scene(spec, 1), std::invalid_argument);
    SceneSpec c = conflict_spec();
    c.foreground_extent = 19;
    CHECK_THROWS_AS(generate_scene(c, 1), std::invalid_argument);
    c.foreground_extent = 81;
    CHECK_THROWS_AS(generate_scene(c, 1), std::invalid_argument);
  }

  TEST_CASE("save and load round-trip bit-identically") {
    TempDir dir("scene");
    const StereoScene s = generate_scene(conflict_spec(), 8);
    save_scene(s, dir.path());
    const StereoScene back = load_scene(dir / "left.pgm", dir / "right.pgm", dir / "disparity.csv");
    CHECK((back.left == s.left).all());
    CHECK((back.right == s.right).all());
    CHECK((back.disparity == s.disparity).all());

    write_disparity_pgm(dir / "disparity.pgm", s.disparity);
    CHECK((read_disparity(dir / "disparity.pgm") == s.disparity).all());
  }

  TEST_CASE("identical images with zero disparity load as a valid scene") {
    TempDir dir("same");
    const StereoScene s = plane_scene(0);
    write_pgm(dir / "img.pgm", s.left, 255);
    write_csv_table(dir / "zero.csv", Image::Zero(s.rows(), s.cols()));
    const StereoScene back = load_scene(dir / "img.pgm", dir / "img.pgm", dir / "zero.csv");
    CHECK((back.left == back.right).all());
    CHECK(back.rows() == kSmallSide);
  }

  TEST_CASE("load rejects mismatched and non-finite inputs") {
    TempDir dir("bad");
    const StereoScene s = plane_scene(0);
    write_pgm(dir / "a.pgm", s.left);
    write_pgm(dir / "b.pgm", s.left.topRows(kSmallSide - 1));
    write_csv_table(dir / "d.csv", Image::Zero(s.rows(), s.cols()));
    CHECK_THROWS_AS(load_scene(dir / "a.pgm", dir / "b.pgm", dir / "d.csv"), FormatError);

    Image bad = Image::Zero(s.rows(), s.cols());
    bad(3, 3) = std::numeric_limits<double>::quiet_NaN();
    write_csv_table(dir / "nan.csv", bad);
    CHECK_THROWS_AS(load_scene(dir / "a.pgm", dir / "a.pgm", dir / "nan.csv"), FormatError);

    std::ofstream(dir / "junk.pgm") << "P9 nonsense";
    CHECK_THROWS_AS(load_scene(dir / "junk.pgm", dir / "a.pgm", dir / "d.csv"), FormatError);
  }

  TEST_CASE("fixations stay inside the valid region") {
    SceneSpec spec;
    const StereoScene s = generate_scene(spec, 2);  // 512 x 512
    CHECK(fixation_margin({}) == 112);
    Rng rng = make_stream(4);
    int lo = 512, hi = 0, vlo = 99, vhi = -99;
    for (int i = 0; i < 4000; ++i) {
      const GazeState g = sample_fixation(s, rng);
      lo = std::min({lo, g.fixation.row, g.fixation.col});
      hi = std::max({hi, g.fixation.row, g.fixation.col});
      vlo = std::min(vlo, g.vergence);
      vhi = std::max(vhi, g.vergence);
      REQUIRE(fixation_is_valid(s, g.fixation, {}));
    }
    CHECK(lo == 112);
    CHECK(hi == 399);
    CHECK(vlo == -16);
    CHECK(vhi == 16);
  }

  TEST_CASE("pinned fixation lands on the anchor and sampling is reproducible") {
    const StereoScene s = generate_scene(conflict_spec(), 1);
    Rng a = make_stream(6);
    CHECK(sample_fixation(s, a, {}, FixationMode::pinned_to_anchor).fixation == PixelPos{160, 160});
    Rng c = make_stream(7), d = make_stream(7);
    CHECK(sample_fixation(s, c) == sample_fixation(s, d));
  }

  TEST_CASE("apply_action arithmetic, clamping and validation") {
    CHECK(apply_action({{0, 0}, 3}, -2).vergence == 1);
    CHECK(apply_action({{0, 0}, 30}, 8).vergence == 32);
    CHECK(apply_action({{0, 0}, 0}, 0).vergence == 0);
    CHECK(apply_action({{7, 9}, 0}, 4).fixation == PixelPos{7, 9});
    CHECK_THROWS_AS(apply_action({{0, 0}, 0}, 3), std::invalid_argument);
    // Monotone in delta and idempotent at the bounds.
    for (int v : {-32, -20, 0, 5, 31}) {
      int previous = -1000;
      for (int a : kVergenceActions) {
        const int next = apply_action({{0, 0}, v}, a).vergence;
        REQUIRE(next >= previous);
        previous = next;
      }
    }
    const GazeState top = apply_action({{0, 0}, 32}, 16);
    CHECK(apply_action(top, 16) == top);
  }

  TEST_CASE("ground truth and residual") {
    const StereoScene plane = plane_scene(5);
    CHECK(ground_truth_vergence(plane, {{120, 120}, -3}) == 5.0);
    const StereoScene conflict = generate_scene(conflict_spec(), 2);
    const GazeState g{{160, 170}, 6};
    CHECK(ground_truth_vergence(conflict, g) == 6.0);
    CHECK(residual_disparity(conflict, g) == 0.0);
    CHECK(residual_disparity(conflict, {{10, 10}, 2}) == -8.0);
  }

  TEST_CASE("right window equals left window translated by d - v") {
    for (int d : {-7, 0, 4, 12}) {
      const StereoScene s = plane_scene(d, 30 + d);
      for (int v : {-5, 0, 3, d}) {
        const int row = 120, col = 120;
        for (Scale sc : kScales) {
          const Image right = extract_window(s.right, row, col - v, sc);
          const Image shifted = extract_window(s.left, row, col - v + d, sc);
          REQUIRE((right == shifted).all());
        }
      }
    }
  }
}

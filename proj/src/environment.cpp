#include "aec/environment.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

#include "aec/image_io.hpp"

namespace aec {
namespace {

constexpr int kInitialVergenceRange = 16;

// Separable Gaussian blur with mirrored borders.
Image gaussian_blur(const Image& src, double sigma) {
  const int radius = std::max(1, static_cast<int>(std::ceil(3.0 * sigma)));
  std::vector<double> kernel(2 * radius + 1);
  double sum = 0.0;
  for (int k = -radius; k <= radius; ++k) {
    kernel[k + radius] = std::exp(-0.5 * k * k / (sigma * sigma));
    sum += kernel[k + radius];
  }
  for (double& k : kernel) k /= sum;

  auto mirror = [](int i, int n) {
    if (i < 0) i = -i - 1;
    if (i >= n) i = 2 * n - i - 1;
    return std::clamp(i, 0, n - 1);
  };

  const int rows = static_cast<int>(src.rows());
  const int cols = static_cast<int>(src.cols());
  Image tmp(rows, cols);
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      double acc = 0.0;
      for (int k = -radius; k <= radius; ++k) acc += kernel[k + radius] * src(r, mirror(c + k, cols));
      tmp(r, c) = acc;
    }
  }
  Image out(rows, cols);
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      double acc = 0.0;
      for (int k = -radius; k <= radius; ++k) acc += kernel[k + radius] * tmp(mirror(r + k, rows), c);
      out(r, c) = acc;
    }
  }
  return out;
}

Image white_noise(int rows, int cols, Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Image img(rows, cols);
  for (Eigen::Index i = 0; i < img.size(); ++i) img.data()[i] = normal(rng);
  return img;
}

Image standardized(const Image& img) {
  const double mean = img.mean();
  const double sd = std::sqrt((img - mean).square().mean());
  return (img - mean) / (sd > 0 ? sd : 1.0);
}

void check_disparity(int d, const EnvironmentLimits& limits, const char* what) {
  if (std::abs(d) > limits.max_disparity)
    throw std::invalid_argument(std::string(what) + " exceeds the disparity limit");
}

}  // namespace

const char* to_string(SceneKind kind) {
  return kind == SceneKind::uniform_plane ? "uniform-plane" : "conflict";
}

SceneKind scene_kind_from_string(const std::string& s) {
  if (s == "uniform-plane") return SceneKind::uniform_plane;
  if (s == "conflict") return SceneKind::conflict;
  throw std::invalid_argument("unknown scene kind '" + s + "'");
}

int fixation_margin(const EnvironmentLimits& limits) { return kCoarseSpan / 2 + limits.max_vergence; }

int minimum_scene_side(const EnvironmentLimits& limits) { return 2 * fixation_margin(limits) + 1; }

bool fixation_is_valid(const StereoScene& scene, PixelPos p, const EnvironmentLimits& limits) {
  const int m = fixation_margin(limits);
  return p.row >= m && p.col >= m && p.row <= scene.rows() - 1 - m && p.col <= scene.cols() - 1 - m;
}

Image make_texture(int rows, int cols, const TextureParams& params, Rng& rng) {
  Image fine_noise = standardized(gaussian_blur(white_noise(rows, cols, rng), 1.0));
  Image broad_noise = standardized(gaussian_blur(white_noise(rows, cols, rng), 3.0));
  Image tex = params.noise_weight * standardized(fine_noise + broad_noise);

  std::uniform_int_distribution<int> count(params.min_gratings, params.max_gratings);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const int gratings = count(rng);
  for (int g = 0; g < gratings; ++g) {
    const double theta = std::numbers::pi * unit(rng);
    const double period = params.min_period + (params.max_period - params.min_period) * unit(rng);
    const double phase = 2.0 * std::numbers::pi * unit(rng);
    const double kx = 2.0 * std::numbers::pi * std::cos(theta) / period;
    const double ky = 2.0 * std::numbers::pi * std::sin(theta) / period;
    for (int r = 0; r < rows; ++r)
      for (int c = 0; c < cols; ++c) tex(r, c) += params.grating_weight * std::cos(kx * c + ky * r + phase);
  }

  const double lo = tex.minCoeff();
  const double hi = tex.maxCoeff();
  Image unit_range = (tex - lo) / (hi > lo ? hi - lo : 1.0);
  return (unit_range * 65535.0).round() / 65535.0;
}

void validate_scene(const StereoScene& scene, const EnvironmentLimits& limits) {
  if (scene.right.rows() != scene.left.rows() || scene.right.cols() != scene.left.cols())
    throw FormatError("left and right images differ in size");
  if (scene.disparity.rows() != scene.left.rows() || scene.disparity.cols() != scene.left.cols())
    throw FormatError("disparity map does not match image size");
  const int min_side = minimum_scene_side(limits);
  if (scene.rows() < min_side || scene.cols() < min_side)
    throw FormatError("scene smaller than " + std::to_string(min_side) + " pixels per side");
  if (!scene.disparity.isFinite().all()) throw FormatError("non-finite disparity values");
  if ((scene.disparity.abs() > limits.max_disparity).any())
    throw FormatError("disparity exceeds the configured limit");
}

StereoScene generate_scene(const SceneSpec& spec, std::uint64_t seed, const EnvironmentLimits& limits,
                           std::string id) {
  check_disparity(spec.background_disparity, limits, "background disparity");
  const int min_side = minimum_scene_side(limits);
  if (spec.rows < min_side || spec.cols < min_side)
    throw std::invalid_argument("scene smaller than " + std::to_string(min_side) + " pixels per side");

  Rng rng = make_stream(seed);
  const int pad = limits.max_disparity;
  const int wide = spec.cols + 2 * pad;

  StereoScene scene;
  scene.id = id.empty() ? std::string(to_string(spec.kind)) + "-" + std::to_string(seed) : std::move(id);

  if (spec.kind == SceneKind::uniform_plane) {
    const Image tex = make_texture(spec.rows, wide, spec.texture, rng);
    const int d = spec.background_disparity;
    scene.left = tex.middleCols(pad, spec.cols);
    scene.right = tex.middleCols(pad + d, spec.cols);
    scene.disparity = Image::Constant(spec.rows, spec.cols, d);
    return scene;
  }

  check_disparity(spec.foreground_disparity, limits, "foreground disparity");
  if (spec.foreground_extent < 20 || spec.foreground_extent > 80)
    throw std::invalid_argument("foreground extent must lie in [20, 80]");

  const Image background = make_texture(spec.rows, wide, spec.texture, rng);
  const Image foreground = make_texture(spec.rows, wide, spec.texture, rng);

  PixelPos anchor;
  if (spec.anchor) {
    anchor = *spec.anchor;
  } else {
    const int m = fixation_margin(limits);
    std::uniform_int_distribution<int> row(m, spec.rows - 1 - m);
    std::uniform_int_distribution<int> col(m, spec.cols - 1 - m);
    anchor.row = row(rng);
    anchor.col = col(rng);
  }
  const int e = spec.foreground_extent;
  if (anchor.row - e < 0 || anchor.col - e < 0 || anchor.row + e > spec.rows || anchor.col + e > spec.cols)
    throw std::invalid_argument("foreground square leaves the image");
  auto in_square = [&](int r, int c) {
    return r >= anchor.row - e && r < anchor.row + e && c >= anchor.col - e && c < anchor.col + e;
  };

  const int fd = spec.foreground_disparity;
  const int bd = spec.background_disparity;
  scene.left.resize(spec.rows, spec.cols);
  scene.right.resize(spec.rows, spec.cols);
  scene.disparity.resize(spec.rows, spec.cols);
  for (int r = 0; r < spec.rows; ++r) {
    for (int c = 0; c < spec.cols; ++c) {
      const bool fg = in_square(r, c);
      scene.left(r, c) = fg ? foreground(r, c + pad) : background(r, c + pad);
      scene.disparity(r, c) = fg ? fd : bd;
      // Right pixel c shows left pixel c + d of whichever surface is in front.
      scene.right(r, c) = in_square(r, c + fd) ? foreground(r, c + fd + pad) : background(r, c + bd + pad);
    }
  }
  scene.anchor = anchor;
  return scene;
}

StereoScene load_scene(const std::filesystem::path& left_path, const std::filesystem::path& right_path,
                       const std::filesystem::path& disparity_path, const EnvironmentLimits& limits) {
  StereoScene scene;
  scene.left = read_pgm(left_path);
  scene.right = read_pgm(right_path);
  scene.disparity = read_disparity(disparity_path);
  scene.id = left_path.stem().string();
  validate_scene(scene, limits);
  return scene;
}

void save_scene(const StereoScene& scene, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  write_pgm(dir / "left.pgm", scene.left, 65535);
  write_pgm(dir / "right.pgm", scene.right, 65535);
  write_csv_table(dir / "disparity.csv", scene.disparity);
}

GazeState sample_fixation(const StereoScene& scene, Rng& rng, const EnvironmentLimits& limits, FixationMode mode) {
  GazeState gaze;
  if (mode == FixationMode::pinned_to_anchor && scene.anchor) {
    gaze.fixation = *scene.anchor;
  } else {
    const int m = fixation_margin(limits);
    std::uniform_int_distribution<int> row(m, scene.rows() - 1 - m);
    std::uniform_int_distribution<int> col(m, scene.cols() - 1 - m);
    gaze.fixation.row = row(rng);
    gaze.fixation.col = col(rng);
  }
  std::uniform_int_distribution<int> vergence(-kInitialVergenceRange, kInitialVergenceRange);
  gaze.vergence = vergence(rng);
  return gaze;
}

GazeState apply_action(const GazeState& gaze, int delta, const EnvironmentLimits& limits) {
  if (std::find(kVergenceActions.begin(), kVergenceActions.end(), delta) == kVergenceActions.end())
    throw std::invalid_argument("vergence action " + std::to_string(delta) + " is not in the action set");
  GazeState next = gaze;
  next.vergence = std::clamp(gaze.vergence + delta, -limits.max_vergence, limits.max_vergence);
  return next;
}

double ground_truth_vergence(const StereoScene& scene, const GazeState& gaze) {
  return scene.disparity(gaze.fixation.row, gaze.fixation.col);
}

}  // namespace aec

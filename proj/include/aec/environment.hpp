#pragma once

#include <filesystem>
#include <optional>
#include <string>

#include "aec/common.hpp"

namespace aec {

struct PixelPos {
  int row = 0;
  int col = 0;
  bool operator==(const PixelPos&) const = default;
};

/// Left/right grayscale views plus the horizontal disparity of every
/// left-image pixel. Positive disparity means the feature appears further
/// left in the right image: right(r, c - d) == left(r, c).
struct StereoScene {
  Image left;
  Image right;
  Image disparity;
  std::string id;
  /// Center of the foreground object for conflict scenes.
  std::optional<PixelPos> anchor;

  int rows() const { return static_cast<int>(left.rows()); }
  int cols() const { return static_cast<int>(left.cols()); }
};

/// Fixation point in the left image plus the vergence shift. The right-eye
/// subwindows are centered at column (fixation.col - vergence), so a
/// vergence equal to the local disparity fuses the two views.
struct GazeState {
  PixelPos fixation;
  int vergence = 0;
  bool operator==(const GazeState&) const = default;
};

struct EnvironmentLimits {
  int max_disparity = 24;
  int max_vergence = 32;
};

enum class SceneKind { uniform_plane, conflict };

const char* to_string(SceneKind kind);
SceneKind scene_kind_from_string(const std::string& s);

/// Texture mixture: bandlimited noise plus a few oriented sinusoidal gratings.
struct TextureParams {
  double noise_weight = 1.0;
  double grating_weight = 0.6;
  int min_gratings = 2;
  int max_gratings = 4;
  double min_period = 6.0;
  double max_period = 40.0;
};

struct SceneSpec {
  SceneKind kind = SceneKind::uniform_plane;
  int rows = 512;
  int cols = 512;
  TextureParams texture;
  int background_disparity = 0;
  int foreground_disparity = 0;
  /// Half-width of the square foreground object (conflict scenes only).
  int foreground_extent = 40;
  /// Foreground center; drawn from the valid fixation region when empty.
  std::optional<PixelPos> anchor;
};

/// Half-width margin that keeps every subwindow inside both images for any
/// vergence within the limits.
int fixation_margin(const EnvironmentLimits& limits);

/// Smallest image side for which the valid fixation region is nonempty.
int minimum_scene_side(const EnvironmentLimits& limits);

bool fixation_is_valid(const StereoScene& scene, PixelPos p, const EnvironmentLimits& limits);

/// Synthesizes a texture in [0, 1], quantized to 16-bit levels.
Image make_texture(int rows, int cols, const TextureParams& params, Rng& rng);

StereoScene generate_scene(const SceneSpec& spec, std::uint64_t seed,
                           const EnvironmentLimits& limits = {}, std::string id = {});

/// Loads a scene from two portable graymaps and a disparity file, which may
/// be a comma-separated table or a 16-bit graymap (see image_io.hpp).
StereoScene load_scene(const std::filesystem::path& left_path, const std::filesystem::path& right_path,
                       const std::filesystem::path& disparity_path, const EnvironmentLimits& limits = {});

/// Writes left.pgm, right.pgm (16-bit) and disparity.csv into dir.
void save_scene(const StereoScene& scene, const std::filesystem::path& dir);

/// Checks the dimensional and range invariants; throws FormatError.
void validate_scene(const StereoScene& scene, const EnvironmentLimits& limits);

enum class FixationMode { uniform, pinned_to_anchor };

/// Uniform fixation over the valid region with vergence uniform in [-16, 16].
GazeState sample_fixation(const StereoScene& scene, Rng& rng, const EnvironmentLimits& limits = {},
                          FixationMode mode = FixationMode::uniform);

/// Applies a vergence action from the action set, clamping to the limits.
GazeState apply_action(const GazeState& gaze, int delta, const EnvironmentLimits& limits = {});

/// Vergence that zeroes retinal disparity at the fixation point.
double ground_truth_vergence(const StereoScene& scene, const GazeState& gaze);

/// Ground truth minus current vergence.
inline double residual_disparity(const StereoScene& scene, const GazeState& gaze) {
  return ground_truth_vergence(scene, gaze) - gaze.vergence;
}

}  // namespace aec

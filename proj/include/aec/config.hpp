#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "aec/agent.hpp"
#include "aec/environment.hpp"

namespace aec {

/// Training scene mixture.
struct CurriculumConfig {
  double uniform_fraction = 0.7;
  /// Plane disparities are drawn uniformly from [-range, range].
  int plane_disparity_range = 8;
  int conflict_disparity_range = 12;
  int min_extent = 20;
  int max_extent = 80;
  /// Probability that a conflict-scene fixation lands on the foreground anchor.
  double pinned_fraction = 0.5;
};

enum class EvalScenes { uniform_plane, conflict };

struct EvalConfig {
  EvalScenes scenes = EvalScenes::uniform_plane;
  int fixations = 200;
  int fixations_per_scene = 10;
  int steps_per_fixation = 10;
  int initial_residual_range = 10;
  /// Conflict scenes: |foreground - background| is drawn from [min, max].
  int conflict_min_separation = 8;
  int conflict_max_separation = 12;
  int conflict_extent = 20;
  int plane_disparity_range = 8;
};

struct ProbeConfig {
  int min_disparity = -20;
  int max_disparity = 20;
  int probes_per_disparity = 100;
};

/// Every tunable of a run. Serialized as a flat INI file with one section
/// per module; the canonical text form is embedded in checkpoints.
struct ProtocolConfig {
  ModelKind model = ModelKind::parallel;
  std::uint64_t seed = 1;
  int scenes_per_run = 10;
  int fixations_per_scene = 20;
  int steps_per_fixation = 10;
  int initial_residual_range = 16;
  int scene_rows = 512;
  int scene_cols = 512;
  int test_scenes = 20;
  /// Fixations between checkpoints written during training; 0 disables.
  int checkpoint_interval = 0;
  int metrics_interval = 1000;
  int workers = 1;
  /// Optional CSV of real scenes: split,left,right,disparity (paths relative
  /// to the manifest). Empty means synthetic scenes.
  std::string scene_manifest;

  EnvironmentLimits limits;
  TextureParams texture;
  CurriculumConfig curriculum;
  AgentConfig agent;
  EvalConfig eval;
  ProbeConfig probe;

  long total_steps() const {
    return static_cast<long>(scenes_per_run) * fixations_per_scene * steps_per_fixation;
  }
};

/// Checks counts and ranges; throws std::invalid_argument.
void validate(const ProtocolConfig& config);

/// Parses INI text. Unknown sections or keys are errors; missing keys keep
/// their defaults.
ProtocolConfig parse_config(const std::string& text);
ProtocolConfig load_config(const std::filesystem::path& path);

/// Canonical INI text listing every key.
std::string to_ini(const ProtocolConfig& config);

}  // namespace aec

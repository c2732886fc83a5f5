#pragma once

#include <array>
#include <cstdint>
#include <initializer_list>
#include <random>
#include <stdexcept>
#include <string>

#include <Eigen/Core>

namespace aec {

/// Grayscale image, row-major, intensities nominally in [0, 1].
using Image = Eigen::Array<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

using Rng = std::mt19937_64;

// Fixed geometry of the sensor and the encoder.
inline constexpr int kPatchSide = 10;
inline constexpr int kPatchPixels = kPatchSide * kPatchSide;
inline constexpr int kPatchDim = 2 * kPatchPixels;  // left eye then right eye
inline constexpr int kWindowSide = 40;
inline constexpr int kPatchStride = 5;
inline constexpr int kGridSide = 7;
inline constexpr int kPatchesPerScale = kGridSide * kGridSide;
inline constexpr int kNumScales = 3;
inline constexpr int kSomSide = 18;
inline constexpr int kNumSubspaces = kSomSide * kSomSide;
inline constexpr int kSubspaceDim = 2;
inline constexpr int kCoarseSpan = kWindowSide * 4;  // source pixels under the coarse window

/// Vergence actions in pixels, in the order used by every policy network.
inline constexpr std::array<int, 11> kVergenceActions{-16, -8, -4, -2, -1, 0, 1, 2, 4, 8, 16};
inline constexpr int kNumActions = static_cast<int>(kVergenceActions.size());
inline constexpr int kNumOptions = 3;

enum class Scale : int { fine = 0, medium = 1, coarse = 2 };

inline constexpr std::array<Scale, kNumScales> kScales{Scale::fine, Scale::medium, Scale::coarse};

constexpr int index_of(Scale s) { return static_cast<int>(s); }

/// Downsampling factor of a scale's subwindow relative to source pixels.
constexpr int downsample_factor(Scale s) { return 1 << index_of(s); }

const char* to_string(Scale s);

/// Patch position inside a 7x7 grid; row and column offsets run from -3 to 3.
constexpr int patch_index(int i, int j) { return (i + 3) * kGridSide + (j + 3); }

/// Raised for malformed files or data that fail validation on load.
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Raised when learning produces non-finite state.
class NumericalFault : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Builds an independent random stream from a parent seed and a path of
/// indices. The result depends only on the arguments, never on call order.
Rng make_stream(std::uint64_t seed, std::initializer_list<std::uint64_t> path = {});

/// Derives a child seed value the same way make_stream derives its state.
std::uint64_t derive_seed(std::uint64_t seed, std::initializer_list<std::uint64_t> path);

}  // namespace aec

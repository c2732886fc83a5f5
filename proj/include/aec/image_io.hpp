#pragma once

#include <filesystem>

#include "aec/common.hpp"

namespace aec {

// Portable graymap (binary P5 and ASCII P2). Intensities map to [0, 1] by
// dividing by the header's maxval.
Image read_pgm(const std::filesystem::path& path);

/// Writes a P5 graymap. Values are clamped to [0, 1] and scaled to maxval,
/// which must be 255 or 65535.
void write_pgm(const std::filesystem::path& path, const Image& image, int maxval = 65535);

// Disparity encoding for 16-bit graymaps: stored = round(d * 256) + 32768.
inline constexpr double kDisparityPgmScale = 256.0;
inline constexpr double kDisparityPgmOffset = 32768.0;

Image read_disparity_pgm(const std::filesystem::path& path);
void write_disparity_pgm(const std::filesystem::path& path, const Image& disparity);

/// Comma-separated table, one image row per line, no header.
Image read_csv_table(const std::filesystem::path& path);
void write_csv_table(const std::filesystem::path& path, const Image& table);

/// Dispatches on extension: .pgm reads the 16-bit encoding, anything else
/// is parsed as a comma-separated table.
Image read_disparity(const std::filesystem::path& path);

}  // namespace aec

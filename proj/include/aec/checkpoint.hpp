#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

#include "aec/agent.hpp"
#include "aec/config.hpp"

namespace aec {

inline constexpr std::uint32_t kCheckpointVersion = 1;

/// Complete training state. Random streams are derived from the master seed
/// and the fixation index, so `fixations_done` is the only stream position
/// that has to be stored.
struct Checkpoint {
  ProtocolConfig config;
  AgentModel model;
  long fixations_done = 0;
};

class VersionError : public FormatError {
 public:
  using FormatError::FormatError;
};

/// Container layout: "AECCKPT\0", u32 version, u64 payload size, payload,
/// u32 CRC-32 of the payload. All integers little endian.
std::string serialize_checkpoint(const Checkpoint& checkpoint);

/// Throws FormatError on truncation or checksum mismatch and VersionError for
/// unknown versions.
Checkpoint deserialize_checkpoint(std::string_view bytes);

/// Writes through a temporary file and renames, so an existing checkpoint at
/// `path` survives a failed write.
void save_checkpoint(const Checkpoint& checkpoint, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace aec

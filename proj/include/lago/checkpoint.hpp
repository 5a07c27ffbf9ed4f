#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "lago/model.hpp"

namespace lago {

/// On disk: "LAGC", u32 version, u64 metadata length, UTF-8 JSON metadata,
/// then w and v as little-endian f64 row-major blocks.
struct Checkpoint {
  LagoParams params;
  std::uint64_t seed = 0;
  std::vector<std::string> attribute_names;
};

std::string encode_checkpoint(const Checkpoint& ckpt);
Checkpoint decode_checkpoint(const std::string& bytes);

void write_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint read_checkpoint(const std::filesystem::path& path);

}  // namespace lago

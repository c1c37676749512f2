#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "gvmt/numerics/tensor.h"

namespace gvmt::data {

inline constexpr std::uint32_t kCheckpointVersion = 1;

// Config block plus named float64 tensors. The model layer decides what the
// names and the config mean.
struct Checkpoint {
  nlohmann::json config = nlohmann::json::object();
  std::vector<num::NamedParameter> tensors;
};

std::string serialize_checkpoint(const Checkpoint& ckpt);
Checkpoint parse_checkpoint(std::string bytes, const std::string& source_name);

// Atomic: temp file + rename.
void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace gvmt::data

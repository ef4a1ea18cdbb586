#pragma once

#include <cstdint>
#include <filesystem>

#include <json.hpp>

#include "hjbadp/mlp.hpp"

namespace hjbadp {

inline constexpr const char* kCheckpointFormat = "HJBADP-CKPT-1";

nlohmann::ordered_json mlp_to_json(const MlpParams& p);
MlpParams mlp_from_json(const nlohmann::json& j);

struct Checkpoint {
  MlpParams actor;
  MlpParams critic;
  std::uint64_t seed = 0;
};

// JSON on disk; doubles are printed in shortest round-trip form so loading
// reproduces the exact same bits.
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace hjbadp

#pragma once

// Self-describing checkpoint files:
//   8 bytes   magic "CLVCKPT1"
//   8 bytes   little-endian header length L
//   L bytes   JSON header {architecture, encoder, config, tensors:[{name, rows, cols}]}
//   float32   tensor data in header order, column-major

#include <nlohmann/json.hpp>

#include <filesystem>
#include <memory>
#include <optional>

#include "clv/training.hpp"

namespace clv {

inline constexpr char kCheckpointMagic[8] = {'C', 'L', 'V', 'C', 'K', 'P', 'T', '1'};

/// Writes atomically (temporary file + rename). `config` is stored verbatim.
void save_checkpoint(const Network& net, const nlohmann::ordered_json& config, const std::filesystem::path& file);

struct LoadedCheckpoint {
    std::unique_ptr<Network> net;
    nlohmann::ordered_json config;
};

/// Rebuilds the network recorded in the file. Throws ContractError on a bad
/// file, a tensor mismatch, or an architecture other than `expected`.
LoadedCheckpoint load_checkpoint(const std::filesystem::path& file,
                                 std::optional<Architecture> expected = std::nullopt);

}  // namespace clv

#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "clmx/network.hpp"

namespace clmx {

inline constexpr int kCheckpointFormatVersion = 1;

struct Provenance {
    std::vector<std::string> trained_on;
    std::string transferred_from;  // source checkpoint id, empty if none
    int transfer_depth = -1;       // -1 = not a transfer
    int epochs = 0;
    double final_dev_ppl = 0.0;

    bool operator==(const Provenance&) const = default;
};

// Named-tensor container for the four-layer network. Parameters live as
// doubles in memory; the file stores 32-bit values, so a save/load round
// trip is bit-exact at float precision.
struct ModelCheckpoint {
    std::string id;
    ModelParams params;
    std::string vocab_hash;  // hex SHA-256 of the vocabulary file bytes
    Provenance provenance;
    int format_version = kCheckpointFormatVersion;
};

void save_checkpoint(const ModelCheckpoint& ckpt, const std::filesystem::path& path);
ModelCheckpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace clmx

#pragma once

#include <string>
#include <string_view>

#include "disvae/training.hpp"

namespace disvae {

inline constexpr std::string_view kCheckpointVersion = "DISVAE1";

// A checkpoint is a text header (version, config, epoch, RNG state, loss
// history, optimizer counters, tensor names and shapes) followed by the
// tensor values as little-endian IEEE-754 doubles in header order. History
// wall-clock times are not stored, so identical runs give identical bytes.
std::string serialize_checkpoint(const TrainState& state);

// Rebuilds the full training state. Throws, naming the first inconsistent
// field, on a version mismatch, malformed header, unknown or missing tensor,
// shape disagreement with the config, or payload length mismatch.
TrainState deserialize_checkpoint(const std::string& bytes);

void save_checkpoint(const std::string& path, const TrainState& state);
TrainState load_checkpoint(const std::string& path);

}  // namespace disvae

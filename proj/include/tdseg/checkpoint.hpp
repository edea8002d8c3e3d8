#ifndef TDSEG_CHECKPOINT_HPP
#define TDSEG_CHECKPOINT_HPP

#include <string>
#include <vector>

#include "tdseg/data_io.hpp"
#include "tdseg/network.hpp"

namespace tdseg {

// Single-file archive: a text manifest (embedded network config,
// preprocessing settings, normalization stats, parameter names and shapes)
// terminated by a sentinel byte, followed by the raw little-endian f32
// payloads in manifest order. Both trainable parameters and persistent
// buffers (running stats) are stored, so save/load roundtrips reproduce the
// model bit-exactly, and inference rebuilds the training-time input stack.

void save_checkpoint(const std::string& path, const Model& m,
                     const std::vector<ChannelStat>& norm_stats,
                     const PreprocessConfig& prep);

// Rebuilds the model (architecture from the embedded config) and overwrites
// every tensor with the stored payloads.
Model load_checkpoint(const std::string& path, std::vector<ChannelStat>* norm_stats = nullptr,
                      PreprocessConfig* prep = nullptr);

}  // namespace tdseg

#endif

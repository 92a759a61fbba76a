#ifndef TGAN_NN_CHECKPOINT_HPP
#define TGAN_NN_CHECKPOINT_HPP

#include <map>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "tgan/nn/networks.hpp"

namespace tgan::nn {

// Single-archive checkpoint holding all model weights plus the config that
// built them. Loading refuses a config mismatch.
struct Checkpoint {
    NetworkConfig config;
    nlohmann::json meta; // training provenance (seed, epoch, corpus hash, ...)
    std::map<std::string, Tensor> tensors;
};

void save_checkpoint(const std::string& path, const NetworkConfig& config,
                     const nlohmann::json& meta,
                     const std::vector<std::pair<std::string, Tensor*>>& tensors);

Checkpoint load_checkpoint(const std::string& path);

// Copies weights into a network's named tensors; throws DataError on missing
// names or shape mismatches, ConfigError on config mismatch.
void restore_into(const Checkpoint& ckpt, const NetworkConfig& expected,
                  std::vector<std::pair<std::string, Tensor*>> tensors);

} // namespace tgan::nn

#endif

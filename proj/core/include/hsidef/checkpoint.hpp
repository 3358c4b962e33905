#pragma once

#include <filesystem>
#include <string>

#include "hsidef/mlp.hpp"
#include "hsidef/train.hpp"

namespace hsidef {

// Checkpoint container: 8-byte magic, u64le header length, JSON header
// (config + tensor directory), then a packed payload of row-major f64le /
// i32le tensors. The layout is documented in the README so other
// implementations can read it.

void save_model(const ModelState& state, const std::filesystem::path& path);
ModelState load_model(const std::filesystem::path& path);

struct ClassifierCheckpoint {
  MlpParams mlp;
  std::string features;  // "spectrum" (baseline) or "latent"
  HeadConfig config;
};

void save_classifier(const MlpParams& mlp, const std::string& features,
                     const HeadConfig& config, const std::filesystem::path& path);
ClassifierCheckpoint load_classifier(const std::filesystem::path& path);

}  // namespace hsidef

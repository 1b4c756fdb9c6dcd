#pragma once

#include "fslab/nn/layers.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <string>

namespace fslab::nn {

/// Single-file archive: magic, JSON header (kind, config, charset hash,
/// parameter names and shapes), then raw little-endian doubles in header order.
struct CheckpointHeader {
    std::string kind;
    nlohmann::json config;
    std::string charset_hash;
};

void save_checkpoint(const std::filesystem::path& path, const CheckpointHeader& header, const ParamList& params);

/// Reads only the header; used to rebuild the model before loading weights.
CheckpointHeader read_checkpoint_header(const std::filesystem::path& path);

/// Copies stored tensors into `params`. Throws CheckpointMismatch when names or
/// shapes differ.
void load_checkpoint_params(const std::filesystem::path& path, const ParamList& params);

}  // namespace fslab::nn

#pragma once

#include <filesystem>
#include <string>

#include "neurofuse/nn.hpp"

namespace neurofuse::io {

// Layout: 8-byte magic "NFCKPT\0\0", u32 format version, u64 header length,
// compact JSON header, then every tensor as little-endian float64 in header
// order. Convolution weights are written in logical (out, in, kernel) order;
// dense weights take the position-major flattening of the last pool output.

struct Checkpoint {
  static constexpr std::uint32_t kFormatVersion = 1;

  nn::ModelParams<double> model;
  nn::ScalerStats scaler;
  /// Free-form provenance: seed, config, split parameters, history summary.
  nlohmann::json metadata = nlohmann::json::object();
};

/// Serialized bytes; identical inputs give identical bytes.
std::string checkpoint_bytes(const Checkpoint& ckpt);
Checkpoint checkpoint_from_bytes(const std::string& bytes, const std::string& origin = "<memory>");

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
/// Throws IoError for unreadable or truncated files and ValidationError for
/// version, architecture or tensor-shape mismatches.
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace neurofuse::io

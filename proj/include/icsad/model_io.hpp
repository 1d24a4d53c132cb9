#pragma once

// Model container file. Layout:
//   bytes 0..7   magic "ICSADMDL"
//   u32 LE       format major version
//   u32 LE       format minor version
//   u64 LE       header length in bytes
//   header       JSON: model config, Adam step counter, caller extras
//   payload      little-endian 64-bit reals: per layer its parameter tensors
//                (weights then bias, or gamma/beta plus batchnorm running
//                stats), then all Adam first moments, then second moments.
// Round-trips are bit-exact. Readers reject unknown major versions instead
// of misparsing.

#include <string>

#include <json.hpp>

#include "icsad/nn.hpp"

namespace icsad::nn {

inline constexpr std::uint32_t kModelFormatMajor = 1;
inline constexpr std::uint32_t kModelFormatMinor = 0;

// `extras` is an opaque JSON object stored in the header; the CLI keeps the
// preprocessing recipe and detection statistics there so a model file is
// self-contained.
void save_model(const Model& model, const std::string& path,
                const nlohmann::json& extras = nlohmann::json::object());

Model load_model(const std::string& path, nlohmann::json* extras = nullptr);

}  // namespace icsad::nn

#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "ddg/network.hpp"

namespace ddg {

/// Little-endian weights file:
///   char[4] "DDGW", u32 version (1), u32 layer count,
///   per layer: u32 rank + u64 dims for weights, then the same for bias
///   (rank 0 for parameterless layers),
///   then every layer's weights and bias values as f64, row-major.
constexpr std::uint32_t kWeightsVersion = 1;

std::vector<std::uint8_t> encode_weights(const NetworkState& state);
NetworkState decode_weights(const std::vector<std::uint8_t>& bytes);

void write_weights(const std::filesystem::path& path, const NetworkState& state);
NetworkState read_weights(const std::filesystem::path& path);

}  // namespace ddg

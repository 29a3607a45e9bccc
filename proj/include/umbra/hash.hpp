#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string_view>

namespace umbra {

using Digest = std::array<uint8_t, 32>;

Digest sha256(std::span<const uint8_t> data);

/// SHA-256(SHA-256(tag) || SHA-256(tag) || data). Distinct tags give
/// independent hash functions, so scalar derivation and address derivation
/// can never collide with each other.
Digest sha256_tagged(std::string_view tag, std::span<const uint8_t> data);

}  // namespace umbra

#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace umbra {

using u128 = unsigned __int128;

/// Raised when a byte encoding (group element, address, hex string) does not
/// parse as the expected canonical form.
class DecodeError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::string to_hex(std::span<const uint8_t> data);
/// Tolerates a 0x prefix; throws DecodeError on anything else non-hex.
std::vector<uint8_t> from_hex(std::string_view hex);

std::string u128_to_string(u128 v);
std::optional<u128> u128_from_string(std::string_view s);      // decimal
std::optional<u128> u128_from_hex_string(std::string_view s);  // 0x-prefixed hex
bool u128_checked_add(u128 a, u128 b, u128& out);              // false on overflow

/// 20-byte chain address. Rendered as 0x + 40 lowercase hex characters.
struct ChainAddress {
  std::array<uint8_t, 20> bytes{};

  static ChainAddress from_uint64(uint64_t v);  // big-endian embed, used by the toy group
  static std::optional<ChainAddress> from_string(std::string_view s);
  std::string to_string() const;

  auto operator<=>(const ChainAddress&) const = default;
};

struct ChainAddressHash {
  size_t operator()(const ChainAddress& a) const noexcept;
};

}  // namespace umbra

template <>
struct std::hash<umbra::ChainAddress> {
  size_t operator()(const umbra::ChainAddress& a) const noexcept {
    return umbra::ChainAddressHash{}(a);
  }
};

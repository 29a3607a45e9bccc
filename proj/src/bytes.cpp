#include "umbra/bytes.hpp"

namespace umbra {

namespace {
constexpr char kHexDigits[] = "0123456789abcdef";

int hex_nibble(char c) {
  if (c >= '0' && c <= '9') return c - '0';
  if (c >= 'a' && c <= 'f') return c - 'a' + 10;
  if (c >= 'A' && c <= 'F') return c - 'A' + 10;
  return -1;
}
}  // namespace

std::string to_hex(std::span<const uint8_t> data) {
  std::string out;
  out.reserve(data.size() * 2);
  for (uint8_t b : data) {
    out.push_back(kHexDigits[b >> 4]);
    out.push_back(kHexDigits[b & 0x0F]);
  }
  return out;
}

std::vector<uint8_t> from_hex(std::string_view hex) {
  const std::string_view original = hex;
  if (hex.size() >= 2 && hex[0] == '0' && (hex[1] == 'x' || hex[1] == 'X')) {
    hex.remove_prefix(2);
  }
  if (hex.size() % 2 != 0) {
    throw DecodeError("hex string has odd length: " + std::string(original));
  }
  std::vector<uint8_t> out(hex.size() / 2);
  for (size_t i = 0; i < out.size(); ++i) {
    int hi = hex_nibble(hex[2 * i]);
    int lo = hex_nibble(hex[2 * i + 1]);
    if (hi < 0 || lo < 0) {
      throw DecodeError("invalid hex string: " + std::string(original));
    }
    out[i] = static_cast<uint8_t>((hi << 4) | lo);
  }
  return out;
}

std::string u128_to_string(u128 v) {
  if (v == 0) return "0";
  std::string out;
  while (v > 0) {
    out.push_back(static_cast<char>('0' + static_cast<unsigned>(v % 10)));
    v /= 10;
  }
  return {out.rbegin(), out.rend()};
}

std::optional<u128> u128_from_string(std::string_view s) {
  if (s.empty() || s.size() > 39) return std::nullopt;
  u128 v = 0;
  constexpr u128 kMax = ~static_cast<u128>(0);
  for (char c : s) {
    if (c < '0' || c > '9') return std::nullopt;
    unsigned d = static_cast<unsigned>(c - '0');
    if (v > (kMax - d) / 10) return std::nullopt;
    v = v * 10 + d;
  }
  return v;
}

std::optional<u128> u128_from_hex_string(std::string_view s) {
  if (s.size() < 3 || s[0] != '0' || (s[1] != 'x' && s[1] != 'X')) return std::nullopt;
  s.remove_prefix(2);
  if (s.size() > 32) return std::nullopt;
  u128 v = 0;
  for (char c : s) {
    int n = hex_nibble(c);
    if (n < 0) return std::nullopt;
    v = (v << 4) | static_cast<unsigned>(n);
  }
  return v;
}

bool u128_checked_add(u128 a, u128 b, u128& out) {
  out = a + b;
  return out >= a;
}

ChainAddress ChainAddress::from_uint64(uint64_t v) {
  ChainAddress a;
  for (int i = 0; i < 8; ++i) {
    a.bytes[19 - i] = static_cast<uint8_t>(v >> (8 * i));
  }
  return a;
}

std::optional<ChainAddress> ChainAddress::from_string(std::string_view s) {
  if (s.size() != 42 || s[0] != '0' || (s[1] != 'x' && s[1] != 'X')) return std::nullopt;
  std::vector<uint8_t> raw;
  try {
    raw = from_hex(s);
  } catch (const DecodeError&) {
    return std::nullopt;
  }
  if (raw.size() != 20) return std::nullopt;
  ChainAddress a;
  std::copy(raw.begin(), raw.end(), a.bytes.begin());
  return a;
}

std::string ChainAddress::to_string() const {
  return "0x" + to_hex(bytes);
}

size_t ChainAddressHash::operator()(const ChainAddress& a) const noexcept {
  // FNV-1a over the 20 bytes.
  uint64_t h = 1469598103934665603ULL;
  for (uint8_t b : a.bytes) {
    h ^= b;
    h *= 1099511628211ULL;
  }
  return static_cast<size_t>(h);
}

}  // namespace umbra

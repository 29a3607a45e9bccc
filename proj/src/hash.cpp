#include "umbra/hash.hpp"

#include <openssl/evp.h>

#include <cstring>
#include <stdexcept>
#include <vector>

namespace umbra {

Digest sha256(std::span<const uint8_t> data) {
  Digest out{};
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), out.data(), &len, EVP_sha256(), nullptr) != 1 ||
      len != out.size()) {
    throw std::runtime_error("sha256 failed");
  }
  return out;
}

Digest sha256_tagged(std::string_view tag, std::span<const uint8_t> data) {
  const Digest tag_hash = sha256(
      std::span<const uint8_t>(reinterpret_cast<const uint8_t*>(tag.data()), tag.size()));
  std::vector<uint8_t> buf;
  buf.reserve(64 + data.size());
  buf.insert(buf.end(), tag_hash.begin(), tag_hash.end());
  buf.insert(buf.end(), tag_hash.begin(), tag_hash.end());
  buf.insert(buf.end(), data.begin(), data.end());
  return sha256(buf);
}

}  // namespace umbra

#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "umbra/bytes.hpp"
#include "umbra/rng.hpp"

namespace umbra {

/// Big-endian 32-byte integer, always reduced modulo the group order.
struct Scalar {
  std::array<uint8_t, 32> be{};

  bool is_zero() const {
    return std::all_of(be.begin(), be.end(), [](uint8_t b) { return b == 0; });
  }
  bool operator==(const Scalar&) const = default;
};

/// Canonical encoding of a group element; equality is byte equality.
struct GroupElement {
  std::vector<uint8_t> data;

  bool operator==(const GroupElement&) const = default;
};

struct Keypair {
  Scalar sk;
  GroupElement pk;
};

/// Prime-order cyclic group written additively. Implementations are stateless
/// and all operations are pure, so a single instance is safe to share across
/// threads.
class Group {
 public:
  virtual ~Group() = default;

  virtual std::string name() const = 0;
  /// Group order as lowercase hex, no 0x prefix.
  virtual std::string order_hex() const = 0;
  virtual GroupElement generator() const = 0;
  virtual GroupElement identity() const = 0;
  virtual bool valid_element(const GroupElement& e) const = 0;

  /// Throws DecodeError if either operand is not a valid encoding.
  virtual GroupElement add(const GroupElement& a, const GroupElement& b) const = 0;
  virtual GroupElement scalar_mul(const Scalar& k, const GroupElement& p) const = 0;
  virtual GroupElement mul_base(const Scalar& k) const = 0;

  virtual Scalar scalar_from_u64(uint64_t v) const = 0;
  /// Interprets bytes as a big-endian integer and reduces it modulo the order.
  virtual Scalar scalar_from_bytes(std::span<const uint8_t> bytes) const = 0;
  virtual Scalar scalar_add(const Scalar& a, const Scalar& b) const = 0;
  virtual Scalar random_nonzero_scalar(Rng& rng) const = 0;

  virtual Scalar hash_to_scalar(const GroupElement& p) const = 0;
  virtual ChainAddress derive_address(const GroupElement& pk) const = 0;

  /// Wire representation of an element (hex with 0x prefix for the production
  /// group, plain decimal for the toy group).
  virtual std::string element_to_string(const GroupElement& e) const = 0;
  virtual GroupElement element_from_string(const std::string& s) const = 0;

  Keypair keygen(Rng& rng) const {
    Scalar sk = random_nonzero_scalar(rng);
    return Keypair{sk, mul_base(sk)};
  }
};

const Group& production_group();
const Group& toy101_group();

/// Lookup by configuration name ("production" or "toy101"); throws
/// std::invalid_argument on anything else.
const Group& find_group(const std::string& name);

}  // namespace umbra

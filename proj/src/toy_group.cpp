#include <stdexcept>
#include <string>

#include "umbra/group.hpp"

namespace umbra {
namespace {

// Additive integers mod 101 with G = 1. Every operation is small enough to
// check by hand, which is the whole point of this instantiation.
constexpr uint64_t kOrder = 101;

uint64_t decode(const GroupElement& e) {
  if (e.data.size() != 1 || e.data[0] >= kOrder) {
    throw DecodeError("not a valid toy101 element");
  }
  return e.data[0];
}

GroupElement encode(uint64_t v) { return GroupElement{{static_cast<uint8_t>(v % kOrder)}}; }

uint64_t scalar_value(const Scalar& k) {
  // Scalars are kept reduced, so only the low byte is ever set.
  return k.be[31];
}

class Toy101Group final : public Group {
 public:
  std::string name() const override { return "toy101"; }
  std::string order_hex() const override { return "65"; }
  GroupElement generator() const override { return encode(1); }
  GroupElement identity() const override { return encode(0); }

  bool valid_element(const GroupElement& e) const override {
    return e.data.size() == 1 && e.data[0] < kOrder;
  }

  GroupElement add(const GroupElement& a, const GroupElement& b) const override {
    return encode(decode(a) + decode(b));
  }

  GroupElement scalar_mul(const Scalar& k, const GroupElement& p) const override {
    return encode(scalar_value(k) * decode(p));
  }

  GroupElement mul_base(const Scalar& k) const override { return encode(scalar_value(k)); }

  Scalar scalar_from_u64(uint64_t v) const override {
    Scalar s;
    s.be[31] = static_cast<uint8_t>(v % kOrder);
    return s;
  }

  Scalar scalar_from_bytes(std::span<const uint8_t> bytes) const override {
    uint64_t r = 0;
    for (uint8_t b : bytes) r = (r * 256 + b) % kOrder;
    return scalar_from_u64(r);
  }

  Scalar scalar_add(const Scalar& a, const Scalar& b) const override {
    return scalar_from_u64(scalar_value(a) + scalar_value(b));
  }

  Scalar random_nonzero_scalar(Rng& rng) const override {
    return scalar_from_u64(rng.between(1, kOrder - 1));
  }

  Scalar hash_to_scalar(const GroupElement& p) const override {
    return scalar_from_u64(decode(p));
  }

  ChainAddress derive_address(const GroupElement& pk) const override {
    return ChainAddress::from_uint64(decode(pk));
  }

  std::string element_to_string(const GroupElement& e) const override {
    return std::to_string(decode(e));
  }

  GroupElement element_from_string(const std::string& s) const override {
    if (s.empty() || s.size() > 3) throw DecodeError("not a valid toy101 element: " + s);
    uint64_t v = 0;
    for (char c : s) {
      if (c < '0' || c > '9') throw DecodeError("not a valid toy101 element: " + s);
      v = v * 10 + static_cast<uint64_t>(c - '0');
    }
    if (v >= kOrder) throw DecodeError("not a valid toy101 element: " + s);
    return encode(v);
  }
};

}  // namespace

const Group& toy101_group() {
  static const Toy101Group g;
  return g;
}

}  // namespace umbra

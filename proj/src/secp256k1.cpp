#include <array>
#include <cstdint>
#include <string_view>

#include "umbra/group.hpp"
#include "umbra/hash.hpp"

namespace umbra {
namespace {

// --------------------------------------------------------------------------
// Field arithmetic modulo p = 2^256 - 2^32 - 977, little-endian 64-bit limbs.
// Every Fe is kept fully reduced; equality is limb equality.
// --------------------------------------------------------------------------

constexpr uint64_t P0 = 0xFFFFFFFEFFFFFC2FULL;
constexpr uint64_t P1 = 0xFFFFFFFFFFFFFFFFULL;
constexpr uint64_t P2 = 0xFFFFFFFFFFFFFFFFULL;
constexpr uint64_t P3 = 0xFFFFFFFFFFFFFFFFULL;

// 2^256 mod p
constexpr uint64_t kFold = 0x1000003D1ULL;

struct Fe {
  uint64_t v[4];

  bool operator==(const Fe&) const = default;
};

constexpr Fe kFeZero{{0, 0, 0, 0}};
constexpr Fe kFeOne{{1, 0, 0, 0}};
constexpr Fe kFeSeven{{7, 0, 0, 0}};

bool fe_is_zero(const Fe& a) { return a == kFeZero; }

bool fe_gte_p(const Fe& a) {
  constexpr uint64_t p[4] = {P0, P1, P2, P3};
  for (int i = 3; i >= 0; --i) {
    if (a.v[i] > p[i]) return true;
    if (a.v[i] < p[i]) return false;
  }
  return true;
}

void fe_sub_p(Fe& a) {
  constexpr uint64_t p[4] = {P0, P1, P2, P3};
  uint64_t borrow = 0;
  for (int i = 0; i < 4; ++i) {
    u128 t = (u128)a.v[i] - p[i] - borrow;
    a.v[i] = (uint64_t)t;
    borrow = (uint64_t)(t >> 64) & 1;
  }
}

Fe fe_add(const Fe& a, const Fe& b) {
  Fe r;
  uint64_t carry = 0;
  for (int i = 0; i < 4; ++i) {
    u128 t = (u128)a.v[i] + b.v[i] + carry;
    r.v[i] = (uint64_t)t;
    carry = (uint64_t)(t >> 64);
  }
  // Sum < 2p, so at most one subtraction; a carry bit and the borrow from
  // the subtraction cancel modulo 2^256.
  if (carry || fe_gte_p(r)) fe_sub_p(r);
  return r;
}

Fe fe_sub(const Fe& a, const Fe& b) {
  constexpr uint64_t p[4] = {P0, P1, P2, P3};
  Fe r;
  uint64_t borrow = 0;
  for (int i = 0; i < 4; ++i) {
    u128 t = (u128)a.v[i] - b.v[i] - borrow;
    r.v[i] = (uint64_t)t;
    borrow = (uint64_t)(t >> 64) & 1;
  }
  if (borrow) {
    uint64_t carry = 0;
    for (int i = 0; i < 4; ++i) {
      u128 t = (u128)r.v[i] + p[i] + carry;
      r.v[i] = (uint64_t)t;
      carry = (uint64_t)(t >> 64);
    }
  }
  return r;
}

Fe fe_neg(const Fe& a) { return fe_is_zero(a) ? a : fe_sub(kFeZero, a); }

Fe fe_reduce512(const uint64_t n[8]) {
  // First fold: lo + hi * (2^256 mod p), giving a 5-limb value.
  uint64_t t[5];
  u128 acc = 0;
  for (int i = 0; i < 4; ++i) {
    acc += n[i];
    acc += (u128)n[4 + i] * kFold;
    t[i] = (uint64_t)acc;
    acc >>= 64;
  }
  t[4] = (uint64_t)acc;

  // Second fold of the ~34-bit top limb.
  Fe r;
  acc = (u128)t[0] + (u128)t[4] * kFold;
  r.v[0] = (uint64_t)acc;
  acc >>= 64;
  for (int i = 1; i < 4; ++i) {
    acc += t[i];
    r.v[i] = (uint64_t)acc;
    acc >>= 64;
  }
  if (acc) {
    // The wrapped value is tiny, so adding the fold constant cannot carry.
    u128 t2 = (u128)r.v[0] + kFold;
    r.v[0] = (uint64_t)t2;
    uint64_t carry = (uint64_t)(t2 >> 64);
    for (int i = 1; i < 4 && carry; ++i) {
      t2 = (u128)r.v[i] + carry;
      r.v[i] = (uint64_t)t2;
      carry = (uint64_t)(t2 >> 64);
    }
  }
  if (fe_gte_p(r)) fe_sub_p(r);
  return r;
}

Fe fe_mul(const Fe& a, const Fe& b) {
  uint64_t n[8];
  uint64_t c0 = 0, c1 = 0, c2 = 0;
  auto muladd = [&](uint64_t x, uint64_t y) {
    u128 t = (u128)x * y;
    uint64_t tl = (uint64_t)t;
    uint64_t th = (uint64_t)(t >> 64);
    c0 += tl;
    th += (c0 < tl) ? 1 : 0;
    c1 += th;
    c2 += (c1 < th) ? 1 : 0;
  };
  auto extract = [&]() {
    uint64_t out = c0;
    c0 = c1;
    c1 = c2;
    c2 = 0;
    return out;
  };
  muladd(a.v[0], b.v[0]);
  n[0] = extract();
  muladd(a.v[0], b.v[1]);
  muladd(a.v[1], b.v[0]);
  n[1] = extract();
  muladd(a.v[0], b.v[2]);
  muladd(a.v[1], b.v[1]);
  muladd(a.v[2], b.v[0]);
  n[2] = extract();
  muladd(a.v[0], b.v[3]);
  muladd(a.v[1], b.v[2]);
  muladd(a.v[2], b.v[1]);
  muladd(a.v[3], b.v[0]);
  n[3] = extract();
  muladd(a.v[1], b.v[3]);
  muladd(a.v[2], b.v[2]);
  muladd(a.v[3], b.v[1]);
  n[4] = extract();
  muladd(a.v[2], b.v[3]);
  muladd(a.v[3], b.v[2]);
  n[5] = extract();
  muladd(a.v[3], b.v[3]);
  n[6] = extract();
  n[7] = c0;
  return fe_reduce512(n);
}

Fe fe_sqr(const Fe& a) { return fe_mul(a, a); }

Fe fe_pow(const Fe& a, const uint64_t e[4]) {
  Fe r = kFeOne;
  for (int i = 255; i >= 0; --i) {
    r = fe_sqr(r);
    if ((e[i / 64] >> (i % 64)) & 1) r = fe_mul(r, a);
  }
  return r;
}

Fe fe_inv(const Fe& a) {
  const uint64_t e[4] = {P0 - 2, P1, P2, P3};
  return fe_pow(a, e);
}

// Square root via a^((p+1)/4); valid because p = 3 (mod 4). The caller must
// check that the square of the result matches, since non-residues also map
// to some output.
Fe fe_sqrt(const Fe& a) {
  uint64_t e[4] = {P0 + 1, P1, P2, P3};
  for (int i = 0; i < 4; ++i) {
    e[i] >>= 2;
    if (i < 3) e[i] |= e[i + 1] << 62;
  }
  return fe_pow(a, e);
}

void fe_to_bytes(const Fe& a, uint8_t out[32]) {
  for (int i = 0; i < 4; ++i) {
    uint64_t w = a.v[3 - i];
    for (int j = 0; j < 8; ++j) out[8 * i + j] = (uint8_t)(w >> (56 - 8 * j));
  }
}

Fe fe_from_bytes_checked(const uint8_t in[32]) {
  Fe a;
  for (int i = 0; i < 4; ++i) {
    uint64_t w = 0;
    for (int j = 0; j < 8; ++j) w = (w << 8) | in[8 * i + j];
    a.v[3 - i] = w;
  }
  if (fe_gte_p(a)) throw DecodeError("field element not below the field prime");
  return a;
}

// --------------------------------------------------------------------------
// Curve arithmetic on y^2 = x^3 + 7. Jacobian coordinates, z = 0 marks the
// point at infinity.
// --------------------------------------------------------------------------

struct Affine {
  Fe x, y;
  bool infinity;
};

struct Jac {
  Fe x, y, z;
};

constexpr Jac kJacInfinity{{{1, 0, 0, 0}}, {{1, 0, 0, 0}}, {{0, 0, 0, 0}}};

bool jac_is_inf(const Jac& p) { return fe_is_zero(p.z); }

Jac jac_double(const Jac& p) {
  if (jac_is_inf(p)) return p;
  // dbl-2009-l, specialised to a = 0.
  Fe a = fe_sqr(p.x);
  Fe b = fe_sqr(p.y);
  Fe c = fe_sqr(b);
  Fe xb = fe_add(p.x, b);
  Fe d = fe_sub(fe_sub(fe_sqr(xb), a), c);
  d = fe_add(d, d);
  Fe e = fe_add(fe_add(a, a), a);
  Fe f = fe_sqr(e);
  Fe x3 = fe_sub(fe_sub(f, d), d);
  Fe c2 = fe_add(c, c);
  Fe c4 = fe_add(c2, c2);
  Fe c8 = fe_add(c4, c4);
  Fe y3 = fe_sub(fe_mul(e, fe_sub(d, x3)), c8);
  Fe z3 = fe_mul(fe_add(p.y, p.y), p.z);
  return {x3, y3, z3};
}

Jac jac_add_affine(const Jac& p, const Affine& q) {
  if (q.infinity) return p;
  if (jac_is_inf(p)) return {q.x, q.y, kFeOne};
  Fe z1z1 = fe_sqr(p.z);
  Fe u2 = fe_mul(q.x, z1z1);
  Fe s2 = fe_mul(q.y, fe_mul(p.z, z1z1));
  Fe h = fe_sub(u2, p.x);
  Fe r = fe_sub(s2, p.y);
  if (fe_is_zero(h)) {
    if (fe_is_zero(r)) return jac_double(p);
    return kJacInfinity;
  }
  Fe h2 = fe_sqr(h);
  Fe h3 = fe_mul(h2, h);
  Fe v = fe_mul(p.x, h2);
  Fe x3 = fe_sub(fe_sub(fe_sqr(r), h3), fe_add(v, v));
  Fe y3 = fe_sub(fe_mul(r, fe_sub(v, x3)), fe_mul(p.y, h3));
  Fe z3 = fe_mul(p.z, h);
  return {x3, y3, z3};
}

Affine jac_to_affine(const Jac& p) {
  if (jac_is_inf(p)) return {kFeZero, kFeZero, true};
  Fe zi = fe_inv(p.z);
  Fe zi2 = fe_sqr(zi);
  return {fe_mul(p.x, zi2), fe_mul(p.y, fe_mul(zi2, zi)), false};
}

Jac point_mul(const std::array<uint8_t, 32>& k, const Affine& p) {
  Jac r = kJacInfinity;
  for (int i = 0; i < 256; ++i) {
    r = jac_double(r);
    if ((k[i / 8] >> (7 - i % 8)) & 1) r = jac_add_affine(r, p);
  }
  return r;
}

// --------------------------------------------------------------------------
// Scalar arithmetic modulo the group order n.
// --------------------------------------------------------------------------

constexpr uint64_t N0 = 0xBFD25E8CD0364141ULL;
constexpr uint64_t N1 = 0xBAAEDCE6AF48A03BULL;
constexpr uint64_t N2 = 0xFFFFFFFFFFFFFFFEULL;
constexpr uint64_t N3 = 0xFFFFFFFFFFFFFFFFULL;

// 2^256 mod n
constexpr uint64_t D0 = 0x402DA1732FC9BEBFULL;
constexpr uint64_t D1 = 0x4551231950B75FC4ULL;
constexpr uint64_t D2 = 1;

bool limbs_gte_n(const uint64_t a[4]) {
  constexpr uint64_t n[4] = {N0, N1, N2, N3};
  for (int i = 3; i >= 0; --i) {
    if (a[i] > n[i]) return true;
    if (a[i] < n[i]) return false;
  }
  return true;
}

void limbs_sub_n(uint64_t a[4]) {
  constexpr uint64_t n[4] = {N0, N1, N2, N3};
  uint64_t borrow = 0;
  for (int i = 0; i < 4; ++i) {
    u128 t = (u128)a[i] - n[i] - borrow;
    a[i] = (uint64_t)t;
    borrow = (uint64_t)(t >> 64) & 1;
  }
}

Scalar limbs_to_scalar(const uint64_t a[4]) {
  Scalar s;
  for (int i = 0; i < 4; ++i) {
    uint64_t w = a[3 - i];
    for (int j = 0; j < 8; ++j) s.be[8 * i + j] = (uint8_t)(w >> (56 - 8 * j));
  }
  return s;
}

void scalar_to_limbs(const Scalar& s, uint64_t out[4]) {
  for (int i = 0; i < 4; ++i) {
    uint64_t w = 0;
    for (int j = 0; j < 8; ++j) w = (w << 8) | s.be[8 * i + j];
    out[3 - i] = w;
  }
}

// Horner evaluation byte by byte, folding the shifted-out top byte back in
// through 2^256 mod n. Handles inputs of any length.
Scalar scalar_reduce_bytes(std::span<const uint8_t> bytes) {
  uint64_t r[4] = {0, 0, 0, 0};
  for (uint8_t byte : bytes) {
    uint64_t top = r[3] >> 56;
    uint64_t t[4];
    t[3] = (r[3] << 8) | (r[2] >> 56);
    t[2] = (r[2] << 8) | (r[1] >> 56);
    t[1] = (r[1] << 8) | (r[0] >> 56);
    t[0] = (r[0] << 8) | byte;
    u128 acc = (u128)t[0] + (u128)top * D0;
    r[0] = (uint64_t)acc;
    acc >>= 64;
    acc += (u128)t[1] + (u128)top * D1;
    r[1] = (uint64_t)acc;
    acc >>= 64;
    acc += (u128)t[2] + (u128)top * D2;
    r[2] = (uint64_t)acc;
    acc >>= 64;
    acc += t[3];
    r[3] = (uint64_t)acc;
    if (acc >> 64) {
      acc = (u128)r[0] + D0;
      r[0] = (uint64_t)acc;
      acc >>= 64;
      acc += (u128)r[1] + D1;
      r[1] = (uint64_t)acc;
      acc >>= 64;
      acc += (u128)r[2] + D2;
      r[2] = (uint64_t)acc;
      acc >>= 64;
      r[3] += (uint64_t)acc;
    }
    if (limbs_gte_n(r)) limbs_sub_n(r);
  }
  return limbs_to_scalar(r);
}

// --------------------------------------------------------------------------
// Canonical encoding: SEC1 compressed points, identity as the single byte
// 0x00.
// --------------------------------------------------------------------------

GroupElement encode_point(const Affine& p) {
  if (p.infinity) return GroupElement{{0x00}};
  GroupElement e;
  e.data.resize(33);
  e.data[0] = (p.y.v[0] & 1) ? 0x03 : 0x02;
  fe_to_bytes(p.x, &e.data[1]);
  return e;
}

Affine decode_point(const GroupElement& e) {
  if (e.data.size() == 1 && e.data[0] == 0x00) return {kFeZero, kFeZero, true};
  if (e.data.size() != 33 || (e.data[0] != 0x02 && e.data[0] != 0x03)) {
    throw DecodeError("not a compressed point encoding");
  }
  Fe x = fe_from_bytes_checked(&e.data[1]);
  Fe rhs = fe_add(fe_mul(fe_sqr(x), x), kFeSeven);
  Fe y = fe_sqrt(rhs);
  if (!(fe_sqr(y) == rhs)) throw DecodeError("x coordinate not on the curve");
  const bool want_odd = e.data[0] == 0x03;
  if ((y.v[0] & 1) != (want_odd ? 1u : 0u)) y = fe_neg(y);
  return {x, y, false};
}

const Affine& generator_affine() {
  static const Affine g = [] {
    const auto gx = from_hex("79be667ef9dcbbac55a06295ce870b07029bfcdb2dce28d959f2815b16f81798");
    const auto gy = from_hex("483ada7726a3c4655da4fbfc0e1108a8fd17b448a68554199c47d08ffb10d4b8");
    return Affine{fe_from_bytes_checked(gx.data()), fe_from_bytes_checked(gy.data()), false};
  }();
  return g;
}

constexpr std::string_view kScalarTag = "umbrakit/hash-to-scalar/v1";
constexpr std::string_view kAddressTag = "umbrakit/address/v1";

class Secp256k1Group final : public Group {
 public:
  std::string name() const override { return "production"; }

  std::string order_hex() const override {
    return "fffffffffffffffffffffffffffffffebaaedce6af48a03bbfd25e8cd0364141";
  }

  GroupElement generator() const override { return encode_point(generator_affine()); }

  GroupElement identity() const override { return GroupElement{{0x00}}; }

  bool valid_element(const GroupElement& e) const override {
    try {
      decode_point(e);
      return true;
    } catch (const DecodeError&) {
      return false;
    }
  }

  GroupElement add(const GroupElement& a, const GroupElement& b) const override {
    Affine pa = decode_point(a);
    Affine pb = decode_point(b);
    if (pa.infinity) return encode_point(pb);
    Jac r = jac_add_affine(Jac{pa.x, pa.y, kFeOne}, pb);
    return encode_point(jac_to_affine(r));
  }

  GroupElement scalar_mul(const Scalar& k, const GroupElement& p) const override {
    Affine pa = decode_point(p);
    return encode_point(jac_to_affine(point_mul(k.be, pa)));
  }

  GroupElement mul_base(const Scalar& k) const override {
    return encode_point(jac_to_affine(point_mul(k.be, generator_affine())));
  }

  Scalar scalar_from_u64(uint64_t v) const override {
    Scalar s;
    for (int i = 0; i < 8; ++i) s.be[24 + i] = (uint8_t)(v >> (56 - 8 * i));
    return s;
  }

  Scalar scalar_from_bytes(std::span<const uint8_t> bytes) const override {
    return scalar_reduce_bytes(bytes);
  }

  Scalar scalar_add(const Scalar& a, const Scalar& b) const override {
    uint64_t la[4], lb[4];
    scalar_to_limbs(a, la);
    scalar_to_limbs(b, lb);
    uint64_t carry = 0;
    for (int i = 0; i < 4; ++i) {
      u128 t = (u128)la[i] + lb[i] + carry;
      la[i] = (uint64_t)t;
      carry = (uint64_t)(t >> 64);
    }
    if (carry || limbs_gte_n(la)) limbs_sub_n(la);
    return limbs_to_scalar(la);
  }

  Scalar random_nonzero_scalar(Rng& rng) const override {
    Scalar s;
    do {
      std::array<uint8_t, 32> buf;
      rng.fill(buf);
      s = scalar_reduce_bytes(buf);
    } while (s.is_zero());
    return s;
  }

  Scalar hash_to_scalar(const GroupElement& p) const override {
    decode_point(p);
    const Digest d = sha256_tagged(kScalarTag, p.data);
    return scalar_reduce_bytes(d);
  }

  ChainAddress derive_address(const GroupElement& pk) const override {
    decode_point(pk);
    const Digest d = sha256_tagged(kAddressTag, pk.data);
    ChainAddress a;
    std::copy(d.begin() + 12, d.end(), a.bytes.begin());
    return a;
  }

  std::string element_to_string(const GroupElement& e) const override {
    return "0x" + to_hex(e.data);
  }

  GroupElement element_from_string(const std::string& s) const override {
    GroupElement e{from_hex(s)};
    decode_point(e);
    return e;
  }
};

}  // namespace

const Group& production_group() {
  static const Secp256k1Group g;
  return g;
}

}  // namespace umbra

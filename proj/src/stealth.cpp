#include "umbra/stealth.hpp"

#include <stdexcept>

namespace umbra {

StealthMetaKeyPair StealthMetaKeyPair::generate(const Group& g, Rng& rng) {
  Keypair view = g.keygen(rng);
  Keypair spend = g.keygen(rng);
  return StealthMetaKeyPair{view.sk, spend.sk, view.pk, spend.pk};
}

StealthMetaKeyPair StealthMetaKeyPair::from_secrets(const Group& g, const Scalar& v,
                                                    const Scalar& s) {
  if (v.is_zero() || s.is_zero()) {
    throw std::invalid_argument("stealth meta-key secrets must be nonzero");
  }
  return StealthMetaKeyPair{v, s, g.mul_base(v), g.mul_base(s)};
}

StealthPayment generate_stealth_payment(const Group& g, const GroupElement& pk_view,
                                        const GroupElement& pk_spend, const Scalar& ephemeral_r) {
  if (ephemeral_r.is_zero()) {
    throw std::invalid_argument("ephemeral scalar must be nonzero");
  }
  GroupElement r_pub = g.mul_base(ephemeral_r);
  Scalar c = g.hash_to_scalar(g.scalar_mul(ephemeral_r, pk_view));
  GroupElement pk_stealth = g.add(g.mul_base(c), pk_spend);
  return StealthPayment{std::move(r_pub), pk_stealth, g.derive_address(pk_stealth)};
}

ScanResult scan_announcements(const Group& g, const Scalar& v, const GroupElement& pk_spend,
                              const std::vector<Announcement>& announcements) {
  ScanResult result;
  for (size_t i = 0; i < announcements.size(); ++i) {
    const Announcement& a = announcements[i];
    if (!g.valid_element(a.pk_stealth)) {
      result.skipped.push_back(i);
      continue;
    }
    try {
      Scalar c = g.hash_to_scalar(g.scalar_mul(v, a.R));
      if (g.add(g.mul_base(c), pk_spend) == a.pk_stealth) result.detected.push_back(i);
    } catch (const DecodeError&) {
      result.skipped.push_back(i);
    }
  }
  return result;
}

Scalar derive_stealth_secret(const Group& g, const Scalar& v, const Scalar& s,
                             const GroupElement& R) {
  return g.scalar_add(g.hash_to_scalar(g.scalar_mul(v, R)), s);
}

}  // namespace umbra

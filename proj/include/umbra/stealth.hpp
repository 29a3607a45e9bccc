#pragma once

#include <cstddef>
#include <vector>

#include "umbra/group.hpp"

namespace umbra {

/// Recipient's long-lived key material: viewing pair (v, pk_view) and
/// spending pair (s, pk_spend).
struct StealthMetaKeyPair {
  Scalar v;
  Scalar s;
  GroupElement pk_view;
  GroupElement pk_spend;

  static StealthMetaKeyPair generate(const Group& g, Rng& rng);
  /// Throws std::invalid_argument if either secret is zero.
  static StealthMetaKeyPair from_secrets(const Group& g, const Scalar& v, const Scalar& s);
};

/// The (R, pk_stealth) pair published on-chain with every stealth payment.
struct Announcement {
  GroupElement R;
  GroupElement pk_stealth;

  bool operator==(const Announcement&) const = default;
};

struct StealthPayment {
  GroupElement R;
  GroupElement pk_stealth;
  ChainAddress stealth_address;

  bool operator==(const StealthPayment&) const = default;
};

/// Sender side: R = r·G, c = H(r·pk_view), pk_stealth = c·G + pk_spend.
/// Throws std::invalid_argument on a zero ephemeral scalar and DecodeError on
/// invalid recipient keys.
StealthPayment generate_stealth_payment(const Group& g, const GroupElement& pk_view,
                                        const GroupElement& pk_spend, const Scalar& ephemeral_r);

struct ScanResult {
  std::vector<size_t> detected;
  /// Indices of malformed announcements, reported rather than fatal.
  std::vector<size_t> skipped;
};

/// Recipient side of the naive linear scan: index i is detected exactly when
/// H(v·R_i)·G + pk_spend equals pk_stealth_i. Indices preserve input order.
ScanResult scan_announcements(const Group& g, const Scalar& v, const GroupElement& pk_spend,
                              const std::vector<Announcement>& announcements);

/// Spending key for a detected payment: sk_st = H(v·R) + s, which satisfies
/// sk_st·G = pk_stealth.
Scalar derive_stealth_secret(const Group& g, const Scalar& v, const Scalar& s,
                             const GroupElement& R);

}  // namespace umbra

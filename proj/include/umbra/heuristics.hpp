#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "umbra/ledger.hpp"

namespace umbra {

enum class HeuristicId { H1, H2, H3, H4 };
const char* heuristic_name(HeuristicId id);

enum class IdentityKind { Registrant, Sender };
const char* identity_kind_name(IdentityKind kind);

/// One deanonymized stealth payment: a stealth address attributed to a
/// visible identity address. At most one finding per stealth address and
/// heuristic.
struct LinkFinding {
  ChainAddress stealth_address;
  ChainAddress attributed_identity;
  IdentityKind identity_kind = IdentityKind::Registrant;
  HeuristicId heuristic_id = HeuristicId::H1;
  bool operator==(const LinkFinding&) const = default;
};

/// Why two addresses ended up in the same cluster.
struct Merge {
  ChainAddress into;
  ChainAddress added;
  HeuristicId via = HeuristicId::H3;
  bool operator==(const Merge&) const = default;
};

/// Disjoint partition over addresses: stealth addresses, plus the anchor
/// recipient address of each collector cluster. Output is deterministic
/// regardless of merge order: partitions are listed by their earliest
/// inserted member, members in insertion order.
class ClusterSet {
 public:
  /// Inserts a as a singleton if it is not yet a member.
  void add(const ChainAddress& a);
  /// Joins the clusters of a and b, inserting either if missing. A self
  /// merge records nothing; linking two members that already share a
  /// cluster still records the evidence.
  void merge(const ChainAddress& a, const ChainAddress& b, HeuristicId via);

  bool contains(const ChainAddress& a) const;
  bool same_cluster(const ChainAddress& a, const ChainAddress& b) const;
  size_t member_count() const { return members_.size(); }

  std::vector<std::vector<ChainAddress>> partitions() const;
  const std::vector<Merge>& merges() const { return merges_; }

  /// Unions another partition into this one, replaying its provenance.
  void absorb(const ClusterSet& other);

 private:
  size_t find(size_t i) const;

  std::vector<ChainAddress> members_;
  AddressMap<size_t> index_;
  mutable std::vector<size_t> parent_;
  std::vector<Merge> merges_;
};

struct HeuristicConfig {
  /// A maxPriorityFeePerGas value counts as identifying when at most this
  /// many withdrawals use it (and at least two).
  uint32_t fee_uniqueness_threshold = 5;
  void validate() const;
};

/// Links a fully withdrawn stealth address to the withdrawal's recipient
/// when that recipient is also a registrant address.
std::vector<LinkFinding> h1_registrant_reuse(const Ledger& ledger);

/// Links a fully withdrawn stealth address to the withdrawal's recipient
/// when that recipient also sent one of the payments funding it.
std::vector<LinkFinding> h2_same_sender_receiver(const Ledger& ledger);

/// Groups fully withdrawn stealth addresses by withdrawal recipient; a
/// recipient collecting two or more becomes a cluster anchored on that
/// recipient address. Lone stealth addresses stay singleton.
ClusterSet h3_collector_pattern(const Ledger& ledger);

/// Clusters stealth addresses whose native, non-relayer withdrawals share a
/// rare maxPriorityFeePerGas value: used at least twice and at most
/// fee_uniqueness_threshold times across the ledger.
ClusterSet h4_unique_priority_fee(const Ledger& ledger, const HeuristicConfig& config = {});

struct LinkageReport {
  std::vector<LinkFinding> h1;
  std::vector<LinkFinding> h2;
  /// One identity per linked stealth address; registrant attributions win
  /// over sender attributions when both exist.
  std::vector<LinkFinding> consolidated;
  /// Distinct stealth addresses attributed by h1 or h2.
  size_t total_linked = 0;
  /// Union of the collector and fee partitions.
  ClusterSet clusters;
};

LinkageReport combine(std::vector<LinkFinding> h1, std::vector<LinkFinding> h2,
                      const ClusterSet& h3, const ClusterSet& h4);

/// The four heuristics plus combine, in one call.
LinkageReport run_all_heuristics(const Ledger& ledger, const HeuristicConfig& config = {});

std::string linkage_report_to_json_text(const LinkageReport& report);

}  // namespace umbra

#include "umbra/heuristics.hpp"

#include <json.hpp>

#include <algorithm>
#include <map>
#include <set>
#include <stdexcept>
#include <unordered_set>

namespace umbra {

const char* heuristic_name(HeuristicId id) {
  switch (id) {
    case HeuristicId::H1: return "H1";
    case HeuristicId::H2: return "H2";
    case HeuristicId::H3: return "H3";
    case HeuristicId::H4: return "H4";
  }
  return "?";
}

const char* identity_kind_name(IdentityKind kind) {
  return kind == IdentityKind::Registrant ? "registrant" : "sender";
}

void HeuristicConfig::validate() const {
  if (fee_uniqueness_threshold < 1) {
    throw std::invalid_argument("fee_uniqueness_threshold must be at least 1");
  }
}

// ---------------------------------------------------------------------------
// ClusterSet
// ---------------------------------------------------------------------------

size_t ClusterSet::find(size_t i) const {
  while (parent_[i] != i) {
    parent_[i] = parent_[parent_[i]];
    i = parent_[i];
  }
  return i;
}

void ClusterSet::add(const ChainAddress& a) {
  if (index_.count(a)) return;
  index_.emplace(a, members_.size());
  parent_.push_back(members_.size());
  members_.push_back(a);
}

void ClusterSet::merge(const ChainAddress& a, const ChainAddress& b, HeuristicId via) {
  add(a);
  add(b);
  if (a == b) return;
  size_t ra = find(index_.at(a));
  size_t rb = find(index_.at(b));
  if (ra != rb) {
    // The earliest inserted member stays the root, which keeps partition
    // ordering independent of merge order.
    if (rb < ra) std::swap(ra, rb);
    parent_[rb] = ra;
  }
  merges_.push_back(Merge{a, b, via});
}

bool ClusterSet::contains(const ChainAddress& a) const { return index_.count(a) != 0; }

bool ClusterSet::same_cluster(const ChainAddress& a, const ChainAddress& b) const {
  auto ia = index_.find(a);
  auto ib = index_.find(b);
  if (ia == index_.end() || ib == index_.end()) return false;
  return find(ia->second) == find(ib->second);
}

std::vector<std::vector<ChainAddress>> ClusterSet::partitions() const {
  std::map<size_t, std::vector<ChainAddress>> by_root;
  for (size_t i = 0; i < members_.size(); ++i) by_root[find(i)].push_back(members_[i]);
  std::vector<std::vector<ChainAddress>> out;
  out.reserve(by_root.size());
  for (auto& [root, group] : by_root) out.push_back(std::move(group));
  return out;
}

void ClusterSet::absorb(const ClusterSet& other) {
  for (const ChainAddress& m : other.members_) add(m);
  for (const Merge& m : other.merges_) merge(m.into, m.added, m.via);
}

// ---------------------------------------------------------------------------
// Heuristics
// ---------------------------------------------------------------------------

namespace {

std::set<ChainAddress> registrant_addresses(const Ledger& ledger) {
  std::set<ChainAddress> out;
  for (const RegistrationTx& r : ledger.registrations) out.insert(r.registrant);
  return out;
}

}  // namespace

std::vector<LinkFinding> h1_registrant_reuse(const Ledger& ledger) {
  const std::set<ChainAddress> registrants = registrant_addresses(ledger);
  const std::set<ChainAddress> full = full_withdraw_set(ledger);
  std::vector<LinkFinding> findings;
  for (const WithdrawTx& w : ledger.withdrawals) {
    if (!full.count(w.stealth_address)) continue;
    if (!registrants.count(w.recipient)) continue;
    findings.push_back(LinkFinding{w.stealth_address, w.recipient, IdentityKind::Registrant,
                                   HeuristicId::H1});
  }
  return findings;
}

std::vector<LinkFinding> h2_same_sender_receiver(const Ledger& ledger) {
  const std::set<ChainAddress> full = full_withdraw_set(ledger);
  std::vector<LinkFinding> findings;
  for (const WithdrawTx& w : ledger.withdrawals) {
    if (!full.count(w.stealth_address)) continue;
    auto it = ledger.sends_by_stealth.find(w.stealth_address);
    if (it == ledger.sends_by_stealth.end()) continue;
    bool sent_by_recipient = false;
    for (size_t idx : it->second) {
      if (ledger.sends[idx].sender == w.recipient) {
        sent_by_recipient = true;
        break;
      }
    }
    if (!sent_by_recipient) continue;
    findings.push_back(
        LinkFinding{w.stealth_address, w.recipient, IdentityKind::Sender, HeuristicId::H2});
  }
  return findings;
}

ClusterSet h3_collector_pattern(const Ledger& ledger) {
  const std::set<ChainAddress> full = full_withdraw_set(ledger);
  AddressMap<std::vector<ChainAddress>> by_recipient;
  std::vector<ChainAddress> recipient_order;
  for (const WithdrawTx& w : ledger.withdrawals) {
    if (!full.count(w.stealth_address)) continue;
    auto [it, inserted] = by_recipient.try_emplace(w.recipient);
    if (inserted) recipient_order.push_back(w.recipient);
    it->second.push_back(w.stealth_address);
  }

  ClusterSet clusters;
  for (const ChainAddress& recipient : recipient_order) {
    const std::vector<ChainAddress>& stealths = by_recipient.at(recipient);
    if (stealths.size() < 2) {
      clusters.add(stealths.front());
      continue;
    }
    for (const ChainAddress& st : stealths) {
      clusters.merge(stealths.front(), st, HeuristicId::H3);
    }
    clusters.merge(stealths.front(), recipient, HeuristicId::H3);
  }
  return clusters;
}

ClusterSet h4_unique_priority_fee(const Ledger& ledger, const HeuristicConfig& config) {
  config.validate();

  std::map<u128, std::vector<ChainAddress>> by_fee;
  std::vector<u128> fee_order;
  for (const WithdrawTx& w : ledger.withdrawals) {
    if (!w.asset.is_native() || w.via_relayer) continue;
    auto [it, inserted] = by_fee.try_emplace(w.max_priority_fee_per_gas);
    if (inserted) fee_order.push_back(w.max_priority_fee_per_gas);
    it->second.push_back(w.stealth_address);
  }

  ClusterSet clusters;
  for (u128 fee : fee_order) {
    const std::vector<ChainAddress>& stealths = by_fee.at(fee);
    if (stealths.size() < 2 || stealths.size() > config.fee_uniqueness_threshold) continue;
    std::vector<ChainAddress> distinct;
    std::unordered_set<ChainAddress, ChainAddressHash> seen;
    for (const ChainAddress& st : stealths) {
      if (seen.insert(st).second) distinct.push_back(st);
    }
    if (distinct.size() < 2) continue;
    for (const ChainAddress& st : distinct) {
      clusters.merge(distinct.front(), st, HeuristicId::H4);
    }
  }
  return clusters;
}

LinkageReport combine(std::vector<LinkFinding> h1, std::vector<LinkFinding> h2,
                      const ClusterSet& h3, const ClusterSet& h4) {
  LinkageReport report;
  report.h1 = std::move(h1);
  report.h2 = std::move(h2);

  std::set<ChainAddress> linked;
  for (const LinkFinding& f : report.h1) {
    if (linked.insert(f.stealth_address).second) report.consolidated.push_back(f);
  }
  std::set<ChainAddress> h2_extra;
  for (const LinkFinding& f : report.h2) {
    if (!linked.count(f.stealth_address) && h2_extra.insert(f.stealth_address).second) {
      report.consolidated.push_back(f);
    }
  }
  report.total_linked = linked.size() + h2_extra.size();

  report.clusters.absorb(h3);
  report.clusters.absorb(h4);
  return report;
}

LinkageReport run_all_heuristics(const Ledger& ledger, const HeuristicConfig& config) {
  return combine(h1_registrant_reuse(ledger), h2_same_sender_receiver(ledger),
                 h3_collector_pattern(ledger), h4_unique_priority_fee(ledger, config));
}

// ---------------------------------------------------------------------------
// Serialization
// ---------------------------------------------------------------------------

namespace {

using nlohmann::ordered_json;

ordered_json finding_to_json(const LinkFinding& f) {
  ordered_json o;
  o["stealth_address"] = f.stealth_address.to_string();
  o["attributed_identity"] = f.attributed_identity.to_string();
  o["identity_kind"] = identity_kind_name(f.identity_kind);
  o["heuristic"] = heuristic_name(f.heuristic_id);
  return o;
}

}  // namespace

std::string linkage_report_to_json_text(const LinkageReport& report) {
  ordered_json o;
  o["total_linked"] = report.total_linked;
  ordered_json counts;
  counts["h1"] = report.h1.size();
  counts["h2"] = report.h2.size();

  // Source heuristics per cluster are recovered from the merge log.
  const auto parts = report.clusters.partitions();
  AddressMap<size_t> part_of;
  for (size_t i = 0; i < parts.size(); ++i) {
    for (const ChainAddress& m : parts[i]) part_of.emplace(m, i);
  }
  std::vector<std::set<std::string>> sources(parts.size());
  for (const Merge& m : report.clusters.merges()) {
    sources[part_of.at(m.into)].insert(heuristic_name(m.via));
  }

  size_t multi = 0;
  for (const auto& p : parts) {
    if (p.size() > 1) ++multi;
  }
  counts["clusters"] = multi;
  counts["clustered_addresses"] = report.clusters.member_count();
  o["counts"] = std::move(counts);

  ordered_json h1 = ordered_json::array();
  for (const LinkFinding& f : report.h1) h1.push_back(finding_to_json(f));
  o["h1"] = std::move(h1);
  ordered_json h2 = ordered_json::array();
  for (const LinkFinding& f : report.h2) h2.push_back(finding_to_json(f));
  o["h2"] = std::move(h2);
  ordered_json consolidated = ordered_json::array();
  for (const LinkFinding& f : report.consolidated) consolidated.push_back(finding_to_json(f));
  o["consolidated"] = std::move(consolidated);

  ordered_json clusters = ordered_json::array();
  for (size_t i = 0; i < parts.size(); ++i) {
    ordered_json c;
    ordered_json members = ordered_json::array();
    for (const ChainAddress& m : parts[i]) members.push_back(m.to_string());
    c["members"] = std::move(members);
    ordered_json src = ordered_json::array();
    for (const std::string& s : sources[i]) src.push_back(s);
    c["sources"] = std::move(src);
    clusters.push_back(std::move(c));
  }
  o["clusters"] = std::move(clusters);

  ordered_json merges = ordered_json::array();
  for (const Merge& m : report.clusters.merges()) {
    ordered_json e;
    e["into"] = m.into.to_string();
    e["added"] = m.added.to_string();
    e["via"] = heuristic_name(m.via);
    merges.push_back(std::move(e));
  }
  o["merges"] = std::move(merges);
  return o.dump(2);
}

}  // namespace umbra

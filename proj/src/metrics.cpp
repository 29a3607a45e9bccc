#include "umbra/metrics.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <ctime>
#include <set>
#include <sstream>
#include <stdexcept>

namespace umbra {

using nlohmann::ordered_json;

EntropyPair entropy_from_counts(const std::vector<size_t>& sizes, size_t n) {
  if (n == 0) throw std::invalid_argument("entropy needs at least one payment");
  size_t covered = 0;
  for (size_t c : sizes) {
    if (c == 0) throw std::invalid_argument("cluster sizes must be positive");
    covered += c;
  }
  if (covered > n) throw std::invalid_argument("cluster sizes exceed the payment count");

  const size_t singletons = n - covered;
  const double dn = static_cast<double>(n);
  double weighted = 0.0;
  for (size_t c : sizes) {
    const double p = static_cast<double>(c) / dn;
    weighted -= p * std::log2(p);
  }
  if (singletons > 0) {
    const double p = 1.0 / dn;
    weighted -= static_cast<double>(singletons) * p * std::log2(p);
  }

  EntropyPair out;
  out.naive_bits = std::log2(dn);
  out.clustered_bits = weighted;
  out.clustered_bits_uniform = std::log2(static_cast<double>(sizes.size() + singletons));
  return out;
}

EntropyPair recipient_entropy(const ClusterSet& clusters, size_t n) {
  std::vector<size_t> sizes;
  for (const auto& part : clusters.partitions()) sizes.push_back(part.size());
  return entropy_from_counts(sizes, n);
}

AnonymityReport anonymity_from_counts(std::string chain, size_t count_h1, size_t count_h2,
                                      size_t total_linked, size_t total_withdrawn,
                                      EntropyPair entropy) {
  if (total_linked > count_h1 + count_h2) {
    throw std::invalid_argument("total linked cannot exceed the per-heuristic counts");
  }
  AnonymityReport r;
  r.chain = std::move(chain);
  r.count_h1 = count_h1;
  r.count_h2 = count_h2;
  r.total_linked = total_linked;
  r.total_withdrawn = total_withdrawn;
  if (total_withdrawn > 0) {
    r.pct_linked = 100.0 * static_cast<double>(total_linked) / static_cast<double>(total_withdrawn);
    r.pct_h1 = 100.0 * static_cast<double>(count_h1) / static_cast<double>(total_withdrawn);
  }
  r.naive_entropy_bits = entropy.naive_bits;
  r.clustered_entropy_bits = entropy.clustered_bits;
  r.clustered_entropy_bits_uniform = entropy.clustered_bits_uniform;
  return r;
}

namespace {

bool ledger_has_address(const Ledger& l, const ChainAddress& a) {
  return l.withdrawals_by_stealth.count(a) || l.withdrawals_by_recipient.count(a) ||
         l.sends_by_stealth.count(a) || l.sends_by_sender.count(a) ||
         l.registrations_by_registrant.count(a);
}

}  // namespace

AnonymityReport linkage_stats(const LinkageReport& report, const Ledger& ledger) {
  for (const std::vector<LinkFinding>* findings : {&report.h1, &report.h2}) {
    for (const LinkFinding& f : *findings) {
      if (!ledger.withdrawals_by_stealth.count(f.stealth_address) ||
          !ledger_has_address(ledger, f.attributed_identity)) {
        throw std::invalid_argument("linkage report references addresses not in this ledger");
      }
    }
  }
  for (const auto& part : report.clusters.partitions()) {
    for (const ChainAddress& m : part) {
      if (!ledger_has_address(ledger, m)) {
        throw std::invalid_argument("linkage report references addresses not in this ledger");
      }
    }
  }

  const size_t total_withdrawn = ledger.withdrawals_by_stealth.size();
  EntropyPair entropy;
  if (total_withdrawn > 0) {
    std::vector<size_t> sizes;
    for (const auto& part : report.clusters.partitions()) {
      size_t withdrawn_members = 0;
      for (const ChainAddress& m : part) {
        if (ledger.withdrawals_by_stealth.count(m)) ++withdrawn_members;
      }
      if (withdrawn_members > 0) sizes.push_back(withdrawn_members);
    }
    entropy = entropy_from_counts(sizes, total_withdrawn);
  }
  return anonymity_from_counts(ledger.chain.name, report.h1.size(), report.h2.size(),
                               report.total_linked, total_withdrawn, entropy);
}

std::string anonymity_report_to_json_text(const AnonymityReport& report) {
  ordered_json o;
  o["chain"] = report.chain;
  o["count_h1"] = report.count_h1;
  o["count_h2"] = report.count_h2;
  o["total_linked"] = report.total_linked;
  o["total_withdrawn"] = report.total_withdrawn;
  o["pct_linked"] = report.pct_linked;
  o["pct_h1"] = report.pct_h1;
  o["naive_entropy_bits"] = report.naive_entropy_bits;
  o["clustered_entropy_bits"] = report.clustered_entropy_bits;
  o["clustered_entropy_bits_uniform"] = report.clustered_entropy_bits_uniform;
  return o.dump(2);
}

WithdrawerDistribution withdrawer_distribution(const Ledger& ledger) {
  WithdrawerDistribution dist;
  for (const auto& [recipient, idxs] : ledger.withdrawals_by_recipient) {
    ++dist.histogram[idxs.size()];
    if (idxs.size() > dist.max_withdrawals ||
        (idxs.size() == dist.max_withdrawals && recipient < dist.busiest)) {
      dist.max_withdrawals = idxs.size();
      dist.busiest = recipient;
    }
  }
  return dist;
}

std::string withdrawer_distribution_to_csv(const WithdrawerDistribution& dist) {
  std::ostringstream out;
  out << "withdrawals_per_address,address_count\n";
  for (const auto& [k, count] : dist.histogram) out << k << "," << count << "\n";
  return out.str();
}

ActivityHeatmap activity_heatmap(const Ledger& ledger, const ChainAddress& address) {
  ActivityHeatmap map;
  map.address = address;
  auto bump = [&](int64_t ts) {
    time_t t = static_cast<time_t>(ts);
    std::tm parts{};
    gmtime_r(&t, &parts);
    ++map.counts[static_cast<size_t>(parts.tm_wday)][static_cast<size_t>(parts.tm_hour)];
    ++map.total;
  };
  for (const RegistrationTx& r : ledger.registrations) {
    if (r.registrant == address) bump(r.timestamp);
  }
  for (const SendTx& s : ledger.sends) {
    if (s.sender == address) bump(s.timestamp);
  }
  for (const WithdrawTx& w : ledger.withdrawals) {
    if (w.recipient == address) bump(w.timestamp);
  }
  map.address_seen = map.total > 0;
  return map;
}

std::string activity_heatmap_to_json_text(const ActivityHeatmap& map) {
  ordered_json o;
  o["address"] = map.address.to_string();
  o["address_seen"] = map.address_seen;
  o["total"] = map.total;
  ordered_json days = ordered_json::array();
  for (const auto& day : map.counts) {
    ordered_json hours = ordered_json::array();
    for (uint64_t c : day) hours.push_back(c);
    days.push_back(std::move(hours));
  }
  o["counts_by_day_and_hour"] = std::move(days);
  return o.dump(2);
}

// ---------------------------------------------------------------------------
// Precision and recall against ground truth
// ---------------------------------------------------------------------------

namespace {

std::optional<uint32_t> owner_of(const GroundTruth& gt, const ChainAddress& a) {
  if (auto it = gt.stealth_entity.find(a); it != gt.stealth_entity.end()) return it->second;
  if (auto it = gt.address_entity.find(a); it != gt.address_entity.end()) return it->second;
  return std::nullopt;
}

bool has_flag(const GroundTruth& gt, uint32_t entity, bool EntityFlags::* flag) {
  return entity < gt.flags.size() && gt.flags[entity].*flag;
}

void finish(AttributionScore& s) {
  if (s.attributions > 0) {
    s.precision = static_cast<double>(s.correct) / static_cast<double>(s.attributions);
  }
  if (s.eligible > 0) {
    size_t found = std::min(s.correct, s.eligible);
    s.recall = static_cast<double>(found) / static_cast<double>(s.eligible);
  }
}

AttributionScore score_findings(const std::vector<LinkFinding>& findings, const GroundTruth& gt,
                                size_t eligible) {
  AttributionScore s;
  s.eligible = eligible;
  for (const LinkFinding& f : findings) {
    ++s.attributions;
    auto st_owner = owner_of(gt, f.stealth_address);
    auto id_owner = owner_of(gt, f.attributed_identity);
    if (st_owner && id_owner && *st_owner == *id_owner) ++s.correct;
  }
  finish(s);
  return s;
}

size_t same_owner_pairs(const std::map<uint32_t, size_t>& counts) {
  size_t pairs = 0;
  for (const auto& [entity, c] : counts) pairs += c * (c - 1) / 2;
  return pairs;
}

AttributionScore score_clusters(const ClusterSet& all, HeuristicId via, const GroundTruth& gt,
                                const std::set<ChainAddress>& eligible_stealth) {
  // Rebuild this heuristic's own partition from its merges.
  ClusterSet own;
  for (const Merge& m : all.merges()) {
    if (m.via == via) own.merge(m.into, m.added, m.via);
  }

  AttributionScore s;
  size_t found_eligible_pairs = 0;
  for (const auto& part : own.partitions()) {
    for (size_t i = 0; i < part.size(); ++i) {
      for (size_t j = i + 1; j < part.size(); ++j) {
        ++s.attributions;
        auto a = owner_of(gt, part[i]);
        auto b = owner_of(gt, part[j]);
        if (a && b && *a == *b) {
          ++s.correct;
          if (eligible_stealth.count(part[i]) && eligible_stealth.count(part[j])) {
            ++found_eligible_pairs;
          }
        }
      }
    }
  }

  std::map<uint32_t, size_t> per_owner;
  for (const ChainAddress& st : eligible_stealth) {
    if (auto o = owner_of(gt, st)) ++per_owner[*o];
  }
  s.eligible = same_owner_pairs(per_owner);
  if (s.attributions > 0) {
    s.precision = static_cast<double>(s.correct) / static_cast<double>(s.attributions);
  }
  if (s.eligible > 0) {
    s.recall =
        static_cast<double>(std::min(found_eligible_pairs, s.eligible)) / static_cast<double>(s.eligible);
  }
  return s;
}

}  // namespace

PrecisionRecallReport precision_recall(const LinkageReport& report, const GroundTruth& gt,
                                       const Ledger& ledger) {
  if (gt.num_entities == 0) {
    throw std::invalid_argument("scoring a report requires non-empty ground truth");
  }

  size_t h1_eligible = 0;
  size_t h2_eligible = 0;
  std::set<ChainAddress> h3_eligible;
  std::set<ChainAddress> h4_eligible;
  for (const auto& [st, widxs] : ledger.withdrawals_by_stealth) {
    auto owner = owner_of(gt, st);
    if (!owner) continue;
    if (has_flag(gt, *owner, &EntityFlags::registrant_reuse)) ++h1_eligible;
    if (has_flag(gt, *owner, &EntityFlags::address_reuse)) h3_eligible.insert(st);
    if (has_flag(gt, *owner, &EntityFlags::manual_fee)) {
      for (size_t i : widxs) {
        const WithdrawTx& w = ledger.withdrawals[i];
        if (w.asset.is_native() && !w.via_relayer) {
          h4_eligible.insert(st);
          break;
        }
      }
    }
    if (auto it = ledger.sends_by_stealth.find(st); it != ledger.sends_by_stealth.end()) {
      for (size_t i : it->second) {
        auto sender_owner = owner_of(gt, ledger.sends[i].sender);
        if (sender_owner && *sender_owner == *owner) {
          ++h2_eligible;
          break;
        }
      }
    }
  }

  PrecisionRecallReport out;
  out.h1 = score_findings(report.h1, gt, h1_eligible);
  out.h2 = score_findings(report.h2, gt, h2_eligible);
  out.h3 = score_clusters(report.clusters, HeuristicId::H3, gt, h3_eligible);
  out.h4 = score_clusters(report.clusters, HeuristicId::H4, gt, h4_eligible);
  return out;
}

std::string precision_recall_to_json_text(const PrecisionRecallReport& report) {
  auto score_json = [](const AttributionScore& s) {
    ordered_json o;
    o["attributions"] = s.attributions;
    o["correct"] = s.correct;
    o["eligible"] = s.eligible;
    if (s.precision) {
      o["precision"] = *s.precision;
    } else {
      o["precision"] = nullptr;
    }
    if (s.recall) {
      o["recall"] = *s.recall;
    } else {
      o["recall"] = nullptr;
    }
    return o;
  };
  ordered_json o;
  o["h1"] = score_json(report.h1);
  o["h2"] = score_json(report.h2);
  o["h3"] = score_json(report.h3);
  o["h4"] = score_json(report.h4);
  return o.dump(2);
}

std::string cumulative_usage_csv(const Ledger& ledger, RecordKind kind) {
  std::ostringstream out;
  size_t n = 0;
  switch (kind) {
    case RecordKind::Registrations:
      out << "timestamp,cumulative_registrations\n";
      for (const auto& r : ledger.registrations) out << r.timestamp << "," << ++n << "\n";
      break;
    case RecordKind::Sends:
      out << "timestamp,cumulative_sends\n";
      for (const auto& s : ledger.sends) out << s.timestamp << "," << ++n << "\n";
      break;
    case RecordKind::Withdrawals:
      out << "timestamp,cumulative_withdrawals\n";
      for (const auto& w : ledger.withdrawals) out << w.timestamp << "," << ++n << "\n";
      break;
  }
  return out.str();
}

}  // namespace umbra

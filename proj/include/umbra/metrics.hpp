#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "umbra/heuristics.hpp"
#include "umbra/ledger.hpp"

namespace umbra {

struct EntropyPair {
  double naive_bits = 0.0;
  /// Guess distribution proportional to cluster payment counts.
  double clustered_bits = 0.0;
  /// Every cluster treated as equally likely.
  double clustered_bits_uniform = 0.0;
};

/// Shannon arithmetic over cluster sizes for n payments. sizes holds the
/// payment count of each cluster; payments not covered by sizes count as
/// singletons. Throws std::invalid_argument when n is zero, a size is zero,
/// or the sizes sum past n.
EntropyPair entropy_from_counts(const std::vector<size_t>& sizes, size_t n);

/// Entropy of n payments where every cluster member stands for one payment;
/// payments outside the cluster set are implied singletons.
EntropyPair recipient_entropy(const ClusterSet& clusters, size_t n);

struct AnonymityReport {
  std::string chain;
  size_t count_h1 = 0;
  size_t count_h2 = 0;
  size_t total_linked = 0;
  /// Distinct stealth addresses with at least one withdrawal.
  size_t total_withdrawn = 0;
  /// Percent of withdrawn stealth payments, 0..100.
  double pct_linked = 0.0;
  double pct_h1 = 0.0;
  double naive_entropy_bits = 0.0;
  double clustered_entropy_bits = 0.0;
  double clustered_entropy_bits_uniform = 0.0;
};

/// Percentage arithmetic alone, for published or synthetic counts. Throws
/// when total_linked exceeds count_h1 + count_h2.
AnonymityReport anonymity_from_counts(std::string chain, size_t count_h1, size_t count_h2,
                                      size_t total_linked, size_t total_withdrawn,
                                      EntropyPair entropy = {});

/// Linkage counts, percentages, and entropy for a report computed from this
/// ledger. Throws std::invalid_argument when the report references addresses
/// the ledger does not contain.
AnonymityReport linkage_stats(const LinkageReport& report, const Ledger& ledger);

std::string anonymity_report_to_json_text(const AnonymityReport& report);

struct WithdrawerDistribution {
  /// withdrawals per recipient address -> number of such recipients.
  std::map<uint64_t, uint64_t> histogram;
  uint64_t max_withdrawals = 0;
  ChainAddress busiest;
};

WithdrawerDistribution withdrawer_distribution(const Ledger& ledger);

/// Two column CSV: withdrawals_per_address,address_count.
std::string withdrawer_distribution_to_csv(const WithdrawerDistribution& dist);

struct ActivityHeatmap {
  ChainAddress address;
  /// counts[day_of_week][hour_of_day] in UTC, day 0 = Sunday.
  std::array<std::array<uint64_t, 24>, 7> counts{};
  uint64_t total = 0;
  /// False when the address never appears as registrant, sender, or
  /// withdrawal recipient; the matrix is then all zero.
  bool address_seen = false;
};

ActivityHeatmap activity_heatmap(const Ledger& ledger, const ChainAddress& address);

std::string activity_heatmap_to_json_text(const ActivityHeatmap& map);

struct AttributionScore {
  size_t attributions = 0;
  size_t correct = 0;
  size_t eligible = 0;
  /// Empty when nothing was attributed.
  std::optional<double> precision;
  /// Empty when nothing was eligible.
  std::optional<double> recall;
};

struct PrecisionRecallReport {
  AttributionScore h1;
  AttributionScore h2;
  AttributionScore h3;
  AttributionScore h4;
};

/// Scores a linkage report against simulator ground truth.
///
/// Identity heuristics score per finding: an attribution is correct when the
/// stealth address and the attributed identity belong to the same entity.
/// Eligibility: withdrawn stealth payments whose owner carries the matching
/// behavior flag (registrant reuse for h1), or whose funding send came from
/// the owner itself (h2).
///
/// Cluster heuristics score pairwise over their own merges: precision over
/// all same-cluster pairs; recall over same-owner pairs of withdrawn stealth
/// addresses whose owner carries the address reuse (h3) or manual fee (h4)
/// flag, h4 restricted to stealth addresses with a native non-relayer
/// withdrawal.
///
/// Throws std::invalid_argument when the ground truth is empty.
PrecisionRecallReport precision_recall(const LinkageReport& report, const GroundTruth& gt,
                                       const Ledger& ledger);

std::string precision_recall_to_json_text(const PrecisionRecallReport& report);

enum class RecordKind { Registrations, Sends, Withdrawals };

/// Two column CSV: timestamp,cumulative count, one row per record in block
/// order.
std::string cumulative_usage_csv(const Ledger& ledger, RecordKind kind);

}  // namespace umbra

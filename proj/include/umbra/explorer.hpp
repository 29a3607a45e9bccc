#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "umbra/ledger.hpp"

namespace umbra {

struct ExplorerConfig {
  /// Scheme, host, and port, e.g. "http://127.0.0.1:8089".
  std::string base_url;
  std::string path = "/api";
  /// Sent as the apikey query parameter; falls back to the
  /// ETHERSCAN_API_KEY environment variable when empty.
  std::string api_key;
  uint32_t page_size = 100;
  /// Attempts per page beyond the first for transport failures, 5xx
  /// answers, and rate-limit pushback.
  uint32_t max_retries = 3;
  /// First retry delay; doubles with each further attempt.
  uint32_t retry_initial_ms = 50;
  uint32_t rate_limit_pause_ms = 100;

  /// Throws std::invalid_argument on an empty base_url or zero page_size.
  void validate() const;
};

/// Fetch failure that survived all retries; remembers which page broke.
class ExplorerError : public std::runtime_error {
 public:
  ExplorerError(size_t page, const std::string& message);
  size_t page() const { return page_; }

 private:
  size_t page_;
};

struct FetchResult {
  /// One compact JSON record per element, page order preserved.
  std::vector<std::string> records;
  size_t pages_fetched = 0;
};

/// Walks an Etherscan-style paged listing:
///   GET {path}?module=account&action=txlist&page=N&offset={page_size}
/// until the endpoint answers "No transactions found", an empty result, or
/// a short page. Rate-limit pushback pauses and retries the same page.
/// Throws ExplorerError naming the page after retries are exhausted or on a
/// response that is not explorer-shaped JSON.
FetchResult fetch_from_explorer(const ExplorerConfig& config);

/// Canonical form of one raw explorer record: maps the explorer spellings
/// hash, from, to, blockNumber, timeStamp, value, gasPaid, and
/// maxPriorityFeePerGas onto the ledger's field names and accepts
/// 0x-prefixed hex for quantities. Canonical fields pass through untouched
/// and win over their aliases. Throws std::invalid_argument when the text
/// is not a JSON object.
std::string normalize_record_text(const std::string& raw);

/// Normalizes raw explorer records and parses them as one ledger. Records
/// the parser rejects land in LoadResult::malformed under their 1-based
/// input position instead of failing the batch.
LoadResult ingest_records(const std::vector<std::string>& raw_records, const Group& g,
                          const ChainId& chain);

/// Offline mode: one raw explorer record per line. Throws
/// std::runtime_error when the file cannot be opened.
LoadResult ingest_export_file(const std::string& path, const Group& g, const ChainId& chain);

}  // namespace umbra

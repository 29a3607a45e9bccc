#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

#include "umbra/bytes.hpp"
#include "umbra/group.hpp"
#include "umbra/stealth.hpp"

namespace umbra {

struct ChainId {
  std::string name;

  bool operator==(const ChainId&) const = default;
};

/// The four chains with published linkage numbers; anything else is a custom
/// chain and still loads fine.
bool is_known_chain(const ChainId& chain);

/// "native" for the chain currency, "token:SYMBOL" for ERC20-style assets.
struct Asset {
  std::string code = "native";

  static Asset native() { return Asset{"native"}; }
  static Asset token(const std::string& symbol) { return Asset{"token:" + symbol}; }
  bool is_native() const { return code == "native"; }
  bool valid() const { return code == "native" || (code.size() > 6 && code.starts_with("token:")); }

  auto operator<=>(const Asset&) const = default;
};

struct RegistrationTx {
  ChainAddress registrant;
  GroupElement pk_view;
  GroupElement pk_spend;
  uint64_t block = 0;
  int64_t timestamp = 0;
};

struct SendTx {
  std::string tx_id;
  ChainAddress sender;
  ChainAddress stealth_address;
  Announcement announcement;
  Asset asset;
  u128 amount = 0;
  uint64_t block = 0;
  int64_t timestamp = 0;
};

struct WithdrawTx {
  std::string tx_id;
  ChainAddress stealth_address;
  ChainAddress recipient;
  Asset asset;
  u128 amount = 0;
  u128 max_priority_fee_per_gas = 0;
  /// Native units spent on gas by this withdrawal; zero for relayed or
  /// token withdrawals.
  u128 gas_paid = 0;
  bool via_relayer = false;
  uint64_t block = 0;
  int64_t timestamp = 0;
};

template <typename T>
using AddressMap = std::unordered_map<ChainAddress, T, ChainAddressHash>;

struct Ledger {
  ChainId chain;
  std::vector<RegistrationTx> registrations;
  std::vector<SendTx> sends;
  std::vector<WithdrawTx> withdrawals;

  // Indexes below hold positions into the vectors above, in vector order.
  // Rebuild with build_indexes() after mutating the record lists.
  AddressMap<std::vector<size_t>> sends_by_stealth;
  AddressMap<std::vector<size_t>> sends_by_sender;
  AddressMap<std::vector<size_t>> withdrawals_by_stealth;
  AddressMap<std::vector<size_t>> withdrawals_by_recipient;
  AddressMap<std::vector<size_t>> registrations_by_registrant;

  /// Sorts each record list by (block, prior position) and rebuilds indexes.
  void build_indexes();

  /// Latest registration for the address, if any (registry overwrites win).
  const RegistrationTx* current_registration(const ChainAddress& registrant) const;

  size_t record_count() const {
    return registrations.size() + sends.size() + withdrawals.size();
  }
};

struct LineDiagnostic {
  size_t line = 0;
  std::string message;
};

struct LoadResult {
  Ledger ledger;
  /// Lines that failed to parse, skipped rather than fatal.
  std::vector<LineDiagnostic> malformed;
  /// Semantic oddities in otherwise well-formed data (value conservation
  /// violations, withdrawals from unknown stealth addresses).
  std::vector<std::string> warnings;
};

LoadResult load_ledger(std::istream& in, const Group& g, const ChainId& chain);
/// Throws std::runtime_error when the file cannot be opened.
LoadResult load_ledger_file(const std::string& path, const Group& g, const ChainId& chain);

void save_ledger(std::ostream& out, const Ledger& ledger, const Group& g);
void save_ledger_file(const std::string& path, const Ledger& ledger, const Group& g);

/// Stealth addresses emptied by exactly one withdrawal: a single token
/// withdrawal always qualifies; a single native withdrawal qualifies when
/// amount + gas_paid equals the cumulative native amount received.
std::set<ChainAddress> full_withdraw_set(const Ledger& ledger);

struct EntityFlags {
  bool registrant_reuse = false;
  bool self_test = false;
  bool address_reuse = false;
  bool manual_fee = false;
};

/// Simulator-side answer key: which entity controls each stealth address and
/// each externally visible address. Absent for ingested real data.
struct GroundTruth {
  uint32_t num_entities = 0;
  AddressMap<uint32_t> stealth_entity;
  AddressMap<uint32_t> address_entity;
  std::vector<EntityFlags> flags;
};

void save_ground_truth(std::ostream& out, const GroundTruth& gt);
void save_ground_truth_file(const std::string& path, const GroundTruth& gt);
/// Throws DecodeError on malformed input.
GroundTruth load_ground_truth(std::istream& in);
GroundTruth load_ground_truth_file(const std::string& path);

}  // namespace umbra

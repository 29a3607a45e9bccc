#include "umbra/ledger.hpp"

#include <json.hpp>

#include <algorithm>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <utility>

namespace umbra {
namespace {

using nlohmann::ordered_json;

struct ParseFail : std::runtime_error {
  using std::runtime_error::runtime_error;
};

const nlohmann::json& field(const nlohmann::json& o, const char* name) {
  auto it = o.find(name);
  if (it == o.end()) throw ParseFail(std::string("missing field '") + name + "'");
  return *it;
}

std::string str_field(const nlohmann::json& o, const char* name) {
  const auto& f = field(o, name);
  if (!f.is_string()) throw ParseFail(std::string("field '") + name + "' must be a string");
  return f.get<std::string>();
}

uint64_t block_field(const nlohmann::json& o) {
  const auto& f = field(o, "block");
  if (!f.is_number_unsigned()) throw ParseFail("field 'block' must be a non-negative integer");
  return f.get<uint64_t>();
}

int64_t timestamp_field(const nlohmann::json& o) {
  const auto& f = field(o, "timestamp");
  if (!f.is_number_integer()) throw ParseFail("field 'timestamp' must be an integer");
  return f.get<int64_t>();
}

ChainAddress address_field(const nlohmann::json& o, const char* name) {
  auto a = ChainAddress::from_string(str_field(o, name));
  if (!a) throw ParseFail(std::string("field '") + name + "' is not a 0x40-hex address");
  return *a;
}

u128 amount_field(const nlohmann::json& o, const char* name) {
  auto v = u128_from_string(str_field(o, name));
  if (!v) throw ParseFail(std::string("field '") + name + "' is not a decimal integer string");
  return *v;
}

u128 amount_field_or_zero(const nlohmann::json& o, const char* name) {
  if (o.find(name) == o.end()) return 0;
  return amount_field(o, name);
}

Asset asset_field(const nlohmann::json& o) {
  Asset a{str_field(o, "asset")};
  if (!a.valid()) throw ParseFail("field 'asset' must be \"native\" or \"token:SYMBOL\"");
  return a;
}

// Accepts anything that decodes to bytes, even when those bytes name no group
// element; ingested announcements may be opaque and the scan layer reports
// malformed ones itself.
GroupElement element_field(const Group& g, const nlohmann::json& o, const char* name) {
  const std::string s = str_field(o, name);
  try {
    return g.element_from_string(s);
  } catch (const DecodeError&) {
  }
  try {
    return GroupElement{from_hex(s)};
  } catch (const DecodeError&) {
    throw ParseFail(std::string("field '") + name + "' is not an element encoding");
  }
}

std::string element_to_wire(const Group& g, const GroupElement& e) {
  try {
    return g.element_to_string(e);
  } catch (const DecodeError&) {
    return "0x" + to_hex(e.data);
  }
}

RegistrationTx parse_registration(const nlohmann::json& o, const Group& g) {
  RegistrationTx r;
  r.registrant = address_field(o, "registrant");
  r.pk_view = element_field(g, o, "pk_view");
  r.pk_spend = element_field(g, o, "pk_spend");
  r.block = block_field(o);
  r.timestamp = timestamp_field(o);
  return r;
}

SendTx parse_send(const nlohmann::json& o, const Group& g) {
  SendTx s;
  s.tx_id = str_field(o, "tx_id");
  s.sender = address_field(o, "sender");
  s.stealth_address = address_field(o, "stealth_address");
  const auto& ann = field(o, "announcement");
  if (!ann.is_object()) throw ParseFail("field 'announcement' must be an object");
  s.announcement.R = element_field(g, ann, "R");
  s.announcement.pk_stealth = element_field(g, ann, "pk_stealth");
  s.asset = asset_field(o);
  s.amount = amount_field(o, "amount");
  s.block = block_field(o);
  s.timestamp = timestamp_field(o);
  return s;
}

WithdrawTx parse_withdraw(const nlohmann::json& o) {
  WithdrawTx w;
  w.tx_id = str_field(o, "tx_id");
  w.stealth_address = address_field(o, "stealth_address");
  w.recipient = address_field(o, "recipient");
  w.asset = asset_field(o);
  w.amount = amount_field(o, "amount");
  w.max_priority_fee_per_gas = amount_field_or_zero(o, "max_priority_fee_per_gas");
  w.gas_paid = amount_field_or_zero(o, "gas_paid");
  if (auto it = o.find("via_relayer"); it != o.end()) {
    if (!it->is_boolean()) throw ParseFail("field 'via_relayer' must be a boolean");
    w.via_relayer = it->get<bool>();
  }
  if (w.via_relayer && w.asset.is_native()) {
    throw ParseFail("via_relayer withdrawals must move a token asset");
  }
  w.block = block_field(o);
  w.timestamp = timestamp_field(o);
  return w;
}

ordered_json registration_to_json(const RegistrationTx& r, const Group& g) {
  return ordered_json{{"kind", "registration"},
                      {"registrant", r.registrant.to_string()},
                      {"pk_view", element_to_wire(g, r.pk_view)},
                      {"pk_spend", element_to_wire(g, r.pk_spend)},
                      {"block", r.block},
                      {"timestamp", r.timestamp}};
}

ordered_json send_to_json(const SendTx& s, const Group& g) {
  return ordered_json{{"kind", "send"},
                      {"tx_id", s.tx_id},
                      {"sender", s.sender.to_string()},
                      {"stealth_address", s.stealth_address.to_string()},
                      {"announcement",
                       ordered_json{{"R", element_to_wire(g, s.announcement.R)},
                                    {"pk_stealth", element_to_wire(g, s.announcement.pk_stealth)}}},
                      {"asset", s.asset.code},
                      {"amount", u128_to_string(s.amount)},
                      {"block", s.block},
                      {"timestamp", s.timestamp}};
}

ordered_json withdraw_to_json(const WithdrawTx& w) {
  return ordered_json{{"kind", "withdraw"},
                      {"tx_id", w.tx_id},
                      {"stealth_address", w.stealth_address.to_string()},
                      {"recipient", w.recipient.to_string()},
                      {"asset", w.asset.code},
                      {"amount", u128_to_string(w.amount)},
                      {"max_priority_fee_per_gas", u128_to_string(w.max_priority_fee_per_gas)},
                      {"gas_paid", u128_to_string(w.gas_paid)},
                      {"via_relayer", w.via_relayer},
                      {"block", w.block},
                      {"timestamp", w.timestamp}};
}

std::vector<std::string> semantic_warnings(const Ledger& ledger) {
  std::vector<std::string> warnings;
  AddressMap<std::map<Asset, u128>> received;
  for (const SendTx& s : ledger.sends) {
    u128& slot = received[s.stealth_address][s.asset];
    u128 next = 0;
    if (u128_checked_add(slot, s.amount, next)) slot = next;
  }
  std::set<std::pair<ChainAddress, Asset>> flagged;
  AddressMap<std::map<Asset, u128>> withdrawn;
  for (const WithdrawTx& w : ledger.withdrawals) {
    if (received.find(w.stealth_address) == received.end()) {
      warnings.push_back("withdrawal " + w.tx_id + " references stealth address " +
                         w.stealth_address.to_string() + " with no recorded send");
      continue;
    }
    u128& slot = withdrawn[w.stealth_address][w.asset];
    u128 next = 0;
    if (u128_checked_add(slot, w.amount, next)) slot = next;
    const auto& recv_assets = received[w.stealth_address];
    auto it = recv_assets.find(w.asset);
    const u128 recv = it == recv_assets.end() ? 0 : it->second;
    if (slot > recv && flagged.insert({w.stealth_address, w.asset}).second) {
      warnings.push_back("stealth address " + w.stealth_address.to_string() + " withdrew more " +
                         w.asset.code + " than it received");
    }
  }
  return warnings;
}

}  // namespace

bool is_known_chain(const ChainId& chain) {
  return chain.name == "mainnet" || chain.name == "polygon" || chain.name == "arbitrum" ||
         chain.name == "optimism";
}

void Ledger::build_indexes() {
  auto by_block = [](auto& v) {
    std::stable_sort(v.begin(), v.end(),
                     [](const auto& a, const auto& b) { return a.block < b.block; });
  };
  by_block(registrations);
  by_block(sends);
  by_block(withdrawals);

  sends_by_stealth.clear();
  sends_by_sender.clear();
  withdrawals_by_stealth.clear();
  withdrawals_by_recipient.clear();
  registrations_by_registrant.clear();

  for (size_t i = 0; i < registrations.size(); ++i) {
    registrations_by_registrant[registrations[i].registrant].push_back(i);
  }
  for (size_t i = 0; i < sends.size(); ++i) {
    sends_by_stealth[sends[i].stealth_address].push_back(i);
    sends_by_sender[sends[i].sender].push_back(i);
  }
  for (size_t i = 0; i < withdrawals.size(); ++i) {
    withdrawals_by_stealth[withdrawals[i].stealth_address].push_back(i);
    withdrawals_by_recipient[withdrawals[i].recipient].push_back(i);
  }
}

const RegistrationTx* Ledger::current_registration(const ChainAddress& registrant) const {
  auto it = registrations_by_registrant.find(registrant);
  if (it == registrations_by_registrant.end() || it->second.empty()) return nullptr;
  return &registrations[it->second.back()];
}

LoadResult load_ledger(std::istream& in, const Group& g, const ChainId& chain) {
  LoadResult result;
  result.ledger.chain = chain;

  std::string line;
  size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    nlohmann::json o = nlohmann::json::parse(line, nullptr, false);
    if (o.is_discarded() || !o.is_object()) {
      result.malformed.push_back({line_no, "not a JSON object"});
      continue;
    }
    try {
      const std::string kind = str_field(o, "kind");
      if (kind == "registration") {
        result.ledger.registrations.push_back(parse_registration(o, g));
      } else if (kind == "send") {
        result.ledger.sends.push_back(parse_send(o, g));
      } else if (kind == "withdraw") {
        result.ledger.withdrawals.push_back(parse_withdraw(o));
      } else if (kind == "manifest") {
        // Metadata line written by the CLI; carries no chain activity.
      } else {
        throw ParseFail("unknown record kind '" + kind + "'");
      }
    } catch (const ParseFail& e) {
      result.malformed.push_back({line_no, e.what()});
    }
  }

  result.ledger.build_indexes();
  result.warnings = semantic_warnings(result.ledger);
  return result;
}

LoadResult load_ledger_file(const std::string& path, const Group& g, const ChainId& chain) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open ledger file: " + path);
  return load_ledger(in, g, chain);
}

void save_ledger(std::ostream& out, const Ledger& ledger, const Group& g) {
  // Chronological merge; within a block registrations come first, then sends,
  // then withdrawals, each in stored order. Loading the result reproduces the
  // stored record lists exactly.
  size_t ri = 0, si = 0, wi = 0;
  while (ri < ledger.registrations.size() || si < ledger.sends.size() ||
         wi < ledger.withdrawals.size()) {
    uint64_t rb = ri < ledger.registrations.size() ? ledger.registrations[ri].block : UINT64_MAX;
    uint64_t sb = si < ledger.sends.size() ? ledger.sends[si].block : UINT64_MAX;
    uint64_t wb = wi < ledger.withdrawals.size() ? ledger.withdrawals[wi].block : UINT64_MAX;
    if (rb <= sb && rb <= wb) {
      out << registration_to_json(ledger.registrations[ri++], g).dump() << '\n';
    } else if (sb <= wb) {
      out << send_to_json(ledger.sends[si++], g).dump() << '\n';
    } else {
      out << withdraw_to_json(ledger.withdrawals[wi++]).dump() << '\n';
    }
  }
}

void save_ledger_file(const std::string& path, const Ledger& ledger, const Group& g) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open ledger file for writing: " + path);
  save_ledger(out, ledger, g);
}

std::set<ChainAddress> full_withdraw_set(const Ledger& ledger) {
  std::set<ChainAddress> out;
  for (const auto& [addr, idxs] : ledger.withdrawals_by_stealth) {
    if (idxs.size() != 1) continue;
    const WithdrawTx& w = ledger.withdrawals[idxs[0]];
    if (!w.asset.is_native()) {
      out.insert(addr);
      continue;
    }
    u128 received = 0;
    if (auto it = ledger.sends_by_stealth.find(addr); it != ledger.sends_by_stealth.end()) {
      for (size_t i : it->second) {
        if (!ledger.sends[i].asset.is_native()) continue;
        u128 next = 0;
        if (u128_checked_add(received, ledger.sends[i].amount, next)) received = next;
      }
    }
    u128 spent = 0;
    if (!u128_checked_add(w.amount, w.gas_paid, spent)) continue;
    if (received > 0 && spent == received) out.insert(addr);
  }
  return out;
}

void save_ground_truth(std::ostream& out, const GroundTruth& gt) {
  auto sorted_entries = [](const AddressMap<uint32_t>& m) {
    std::vector<std::pair<std::string, uint32_t>> v;
    v.reserve(m.size());
    for (const auto& [addr, id] : m) v.emplace_back(addr.to_string(), id);
    std::sort(v.begin(), v.end());
    return v;
  };

  ordered_json o;
  o["num_entities"] = gt.num_entities;
  ordered_json stealth = ordered_json::object();
  for (const auto& [addr, id] : sorted_entries(gt.stealth_entity)) stealth[addr] = id;
  o["stealth"] = std::move(stealth);
  ordered_json addresses = ordered_json::object();
  for (const auto& [addr, id] : sorted_entries(gt.address_entity)) addresses[addr] = id;
  o["addresses"] = std::move(addresses);
  ordered_json flags = ordered_json::array();
  for (const EntityFlags& f : gt.flags) {
    flags.push_back(ordered_json{{"registrant_reuse", f.registrant_reuse},
                                 {"self_test", f.self_test},
                                 {"address_reuse", f.address_reuse},
                                 {"manual_fee", f.manual_fee}});
  }
  o["flags"] = std::move(flags);
  out << o.dump(2) << '\n';
}

void save_ground_truth_file(const std::string& path, const GroundTruth& gt) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open ground truth file for writing: " + path);
  save_ground_truth(out, gt);
}

GroundTruth load_ground_truth(std::istream& in) {
  nlohmann::json o = nlohmann::json::parse(in, nullptr, false);
  if (o.is_discarded() || !o.is_object()) throw DecodeError("ground truth is not a JSON object");

  GroundTruth gt;
  auto num = o.find("num_entities");
  if (num == o.end() || !num->is_number_unsigned()) {
    throw DecodeError("ground truth needs an unsigned 'num_entities'");
  }
  gt.num_entities = num->get<uint32_t>();

  auto read_map = [&](const char* key, AddressMap<uint32_t>& target) {
    auto it = o.find(key);
    if (it == o.end() || !it->is_object()) {
      throw DecodeError(std::string("ground truth needs an object field '") + key + "'");
    }
    for (const auto& [k, v] : it->items()) {
      auto addr = ChainAddress::from_string(k);
      if (!addr || !v.is_number_unsigned() || v.get<uint32_t>() >= gt.num_entities) {
        throw DecodeError(std::string("ground truth field '") + key + "' has a bad entry: " + k);
      }
      target[*addr] = v.get<uint32_t>();
    }
  };
  read_map("stealth", gt.stealth_entity);
  read_map("addresses", gt.address_entity);

  auto flags = o.find("flags");
  if (flags == o.end() || !flags->is_array() || flags->size() != gt.num_entities) {
    throw DecodeError("ground truth needs a 'flags' array with one entry per entity");
  }
  for (const auto& f : *flags) {
    if (!f.is_object()) throw DecodeError("ground truth flags entries must be objects");
    EntityFlags e;
    e.registrant_reuse = f.value("registrant_reuse", false);
    e.self_test = f.value("self_test", false);
    e.address_reuse = f.value("address_reuse", false);
    e.manual_fee = f.value("manual_fee", false);
    gt.flags.push_back(e);
  }
  return gt;
}

GroundTruth load_ground_truth_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open ground truth file: " + path);
  return load_ground_truth(in);
}

}  // namespace umbra

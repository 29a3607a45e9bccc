#include "umbra/explorer.hpp"

#include <httplib.h>
#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <thread>

namespace umbra {

using nlohmann::ordered_json;

void ExplorerConfig::validate() const {
  if (base_url.empty()) throw std::invalid_argument("base_url must not be empty");
  if (page_size == 0) throw std::invalid_argument("page_size must be at least 1");
}

ExplorerError::ExplorerError(size_t page, const std::string& message)
    : std::runtime_error("page " + std::to_string(page) + ": " + message), page_(page) {}

namespace {

std::optional<u128> quantity_value(const nlohmann::json& v) {
  if (v.is_string()) {
    const std::string s = v.get<std::string>();
    if (s.starts_with("0x") || s.starts_with("0X")) return u128_from_hex_string(s);
    return u128_from_string(s);
  }
  if (v.is_number_unsigned()) return static_cast<u128>(v.get<uint64_t>());
  if (v.is_number_integer() && v.get<int64_t>() >= 0) {
    return static_cast<u128>(v.get<int64_t>());
  }
  return std::nullopt;
}

void move_alias(ordered_json& o, const char* alias, const char* canonical) {
  auto it = o.find(alias);
  if (it == o.end()) return;
  if (!o.contains(canonical)) o[canonical] = std::move(*it);
  o.erase(alias);
}

/// Leaves the field alone when it cannot be read as a quantity, so the
/// ledger parser reports the rejection under the right field name.
void to_integer_field(ordered_json& o, const char* name, u128 limit) {
  auto it = o.find(name);
  if (it == o.end() || it->is_number_unsigned()) return;
  auto q = quantity_value(*it);
  if (q && *q <= limit) *it = static_cast<uint64_t>(*q);
}

void to_decimal_field(ordered_json& o, const char* name) {
  auto it = o.find(name);
  if (it == o.end()) return;
  auto q = quantity_value(*it);
  if (q) *it = u128_to_string(*q);
}

ordered_json normalize_record(ordered_json o) {
  const std::string kind = o.contains("kind") && o["kind"].is_string()
                               ? o["kind"].get<std::string>()
                               : std::string();
  move_alias(o, "hash", "tx_id");
  if (kind == "registration") {
    move_alias(o, "from", "registrant");
  } else if (kind == "send") {
    move_alias(o, "from", "sender");
  } else if (kind == "withdraw") {
    move_alias(o, "from", "stealth_address");
    move_alias(o, "to", "recipient");
  }
  move_alias(o, "blockNumber", "block");
  move_alias(o, "timeStamp", "timestamp");
  move_alias(o, "value", "amount");
  move_alias(o, "maxPriorityFeePerGas", "max_priority_fee_per_gas");
  move_alias(o, "gasPaid", "gas_paid");

  to_integer_field(o, "block", UINT64_MAX);
  to_integer_field(o, "timestamp", INT64_MAX);
  to_decimal_field(o, "amount");
  to_decimal_field(o, "max_priority_fee_per_gas");
  to_decimal_field(o, "gas_paid");
  return o;
}

bool is_blank(const std::string& s) {
  return std::all_of(s.begin(), s.end(), [](unsigned char c) { return std::isspace(c); });
}

bool mentions_rate_limit(const nlohmann::json& body) {
  auto contains = [](const nlohmann::json& v) {
    if (!v.is_string()) return false;
    std::string s = v.get<std::string>();
    std::transform(s.begin(), s.end(), s.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return s.find("rate limit") != std::string::npos;
  };
  return (body.contains("message") && contains(body["message"])) ||
         (body.contains("result") && contains(body["result"]));
}

}  // namespace

std::string normalize_record_text(const std::string& raw) {
  ordered_json o = ordered_json::parse(raw);
  if (!o.is_object()) throw std::invalid_argument("record is not a JSON object");
  return normalize_record(std::move(o)).dump();
}

LoadResult ingest_records(const std::vector<std::string>& raw_records, const Group& g,
                          const ChainId& chain) {
  std::ostringstream canonical;
  std::vector<LineDiagnostic> rejected;
  std::vector<size_t> origin;
  for (size_t i = 0; i < raw_records.size(); ++i) {
    if (is_blank(raw_records[i])) continue;
    try {
      canonical << normalize_record_text(raw_records[i]) << '\n';
      origin.push_back(i + 1);
    } catch (const std::exception& e) {
      rejected.push_back({i + 1, e.what()});
    }
  }

  std::istringstream in(canonical.str());
  LoadResult result = load_ledger(in, g, chain);
  for (LineDiagnostic& d : result.malformed) d.line = origin.at(d.line - 1);
  result.malformed.insert(result.malformed.begin(), rejected.begin(), rejected.end());
  std::stable_sort(result.malformed.begin(), result.malformed.end(),
                   [](const LineDiagnostic& a, const LineDiagnostic& b) { return a.line < b.line; });
  return result;
}

LoadResult ingest_export_file(const std::string& path, const Group& g, const ChainId& chain) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open export file: " + path);
  std::vector<std::string> lines;
  for (std::string line; std::getline(in, line);) lines.push_back(line);
  return ingest_records(lines, g, chain);
}

FetchResult fetch_from_explorer(const ExplorerConfig& config) {
  config.validate();
  std::string key = config.api_key;
  if (key.empty()) {
    if (const char* env = std::getenv("ETHERSCAN_API_KEY")) key = env;
  }

  httplib::Client client(config.base_url);
  client.set_connection_timeout(5, 0);
  client.set_read_timeout(10, 0);

  FetchResult out;
  for (size_t page = 1;; ++page) {
    std::string target = config.path +
                         "?module=account&action=txlist&page=" + std::to_string(page) +
                         "&offset=" + std::to_string(config.page_size);
    if (!key.empty()) target += "&apikey=" + key;

    bool more = false;
    std::string last_failure;
    for (uint32_t attempt = 0;; ++attempt) {
      if (attempt > config.max_retries) throw ExplorerError(page, last_failure);
      if (attempt > 0) {
        std::this_thread::sleep_for(
            std::chrono::milliseconds(config.retry_initial_ms << (attempt - 1)));
      }

      httplib::Result res = client.Get(target);
      if (!res) {
        last_failure = "transport error: " + httplib::to_string(res.error());
        continue;
      }
      if (res->status >= 500) {
        last_failure = "server answered status " + std::to_string(res->status);
        continue;
      }
      if (res->status != 200) {
        throw ExplorerError(page, "unexpected status " + std::to_string(res->status));
      }

      nlohmann::json body = nlohmann::json::parse(res->body, nullptr, false);
      if (body.is_discarded() || !body.is_object() || !body.contains("status") ||
          !body["status"].is_string()) {
        throw ExplorerError(page, "response is not explorer-shaped JSON");
      }

      const std::string status = body["status"].get<std::string>();
      const nlohmann::json& result = body.contains("result") ? body["result"] : nlohmann::json();
      if (status == "1") {
        if (!result.is_array()) throw ExplorerError(page, "result is not an array");
        for (const auto& record : result) out.records.push_back(record.dump());
        more = result.size() >= config.page_size;
        break;
      }
      if (mentions_rate_limit(body)) {
        last_failure = "rate limited";
        std::this_thread::sleep_for(std::chrono::milliseconds(config.rate_limit_pause_ms));
        continue;
      }
      const std::string message =
          body.contains("message") && body["message"].is_string()
              ? body["message"].get<std::string>()
              : std::string();
      if (message == "No transactions found" || (result.is_array() && result.empty())) {
        more = false;
        break;
      }
      std::string detail = result.is_string() ? result.get<std::string>() : message;
      if (detail.empty()) detail = body.dump();
      throw ExplorerError(page, "explorer rejected the query: " + detail);
    }

    ++out.pages_fetched;
    if (!more) break;
  }
  return out;
}

}  // namespace umbra

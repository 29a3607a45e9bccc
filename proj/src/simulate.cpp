#include "umbra/simulate.hpp"

#include <json.hpp>

#include <algorithm>
#include <stdexcept>
#include <utility>

namespace umbra {
namespace {

using nlohmann::ordered_json;

// 2023-01-01T00:00:00Z; payments begin one day later, registrations fill the
// gap at one per block.
constexpr int64_t kGenesis = 1672531200;
constexpr int64_t kBlockSeconds = 12;
constexpr int64_t kPaymentsOffset = 86400;

constexpr uint64_t kGwei = 1000000000ULL;
constexpr u128 kWithdrawGasUnits = 21000;

constexpr uint64_t kRoundFees[] = {kGwei, kGwei * 3 / 2, kGwei * 2, kGwei * 5 / 2, kGwei * 3};
constexpr uint64_t kRelayerFees[] = {kGwei * 5 / 4, kGwei * 7 / 4, kGwei * 9 / 4};
const char* const kTokenSymbols[] = {"DAI", "USDC", "WETH"};

bool is_reserved_fee(u128 v) {
  for (uint64_t f : kRoundFees) {
    if (v == f) return true;
  }
  for (uint64_t f : kRelayerFees) {
    if (v == f) return true;
  }
  return false;
}

u128 pow10_u128(int e) {
  u128 v = 1;
  for (int i = 0; i < e; ++i) v *= 10;
  return v;
}

void require(bool ok, const std::string& message) {
  if (!ok) throw std::invalid_argument(message);
}

}  // namespace

void BehaviorProfile::validate() const {
  auto prob = [](double p) { return p >= 0.0 && p <= 1.0; };
  require(prob(p_withdraw_to_registrant), "p_withdraw_to_registrant must lie in [0,1]");
  require(prob(p_self_test_payment), "p_self_test_payment must lie in [0,1]");
  require(prob(p_partial_withdraw), "p_partial_withdraw must lie in [0,1]");
  require(collector_degree >= 1, "collector_degree must be at least 1");
  require(!manual_fee_wei || *manual_fee_wei > 0, "manual fee value must be positive");
  require(burstiness.active_window_days > 0, "active_window_days must be positive");
  require(burstiness.payments_in_window > 0, "payments_in_window must be positive");
}

BehaviorProfile profile_preset(const std::string& name) {
  BehaviorProfile p;
  p.name = name;
  if (name == "default") {
    p.p_withdraw_to_registrant = 0.3;
    p.p_self_test_payment = 0.05;
    p.collector_degree = 2;
    p.p_partial_withdraw = 0.05;
  } else if (name == "collector") {
    p.collector_degree = 1;
  } else if (name == "registrant_reuser") {
    p.p_withdraw_to_registrant = 1.0;
  } else if (name == "self_tester") {
    p.p_self_test_payment = 1.0;
  } else if (name == "manual_fee") {
    p.fee_habit = FeeHabit::Manual;
    p.fresh_withdraw_addresses = true;
  } else if (name == "countermeasure") {
    p.fresh_withdraw_addresses = true;
  } else {
    throw std::invalid_argument("unknown behavior profile preset '" + name + "'");
  }
  return p;
}

BehaviorProfile countermeasure_profile() { return profile_preset("countermeasure"); }

void SimConfig::validate() const {
  require(entities >= 2, "simulation needs at least 2 entities");
  require(payments >= 1, "simulation needs at least 1 payment");
  require(token_fraction >= 0.0 && token_fraction <= 1.0, "token_fraction must lie in [0,1]");
  require(horizon_days >= 1, "horizon_days must be at least 1");
  require(amount_exp_min >= 0 && amount_exp_max >= amount_exp_min && amount_exp_max <= 30,
          "amount exponent range must satisfy 0 <= min <= max <= 30");
  find_group(group);
  for (const ProfileAssignment& a : profiles) {
    a.profile.validate();
    require(a.weight > 0.0, "profile weights must be positive");
  }
}

SimEngine::SimEngine(const Group& g, uint64_t seed, ChainId chain, uint32_t horizon_days,
                     int amount_exp_min, int amount_exp_max)
    : group_(g),
      rng_(seed),
      chain_(std::move(chain)),
      genesis_(kGenesis),
      payments_start_(kGenesis + kPaymentsOffset),
      horizon_seconds_(static_cast<int64_t>(horizon_days) * 86400),
      amount_exp_min_(amount_exp_min),
      amount_exp_max_(amount_exp_max) {}

ChainAddress SimEngine::fresh_address(uint32_t owner) {
  for (;;) {
    ChainAddress a;
    rng_.fill(a.bytes);
    if (!used_addresses_.insert(a).second) continue;
    ground_truth_.address_entity[a] = owner;
    return a;
  }
}

u128 SimEngine::unique_noisy_fee() {
  for (;;) {
    u128 v = kGwei + rng_.below(2 * kGwei);
    if (is_reserved_fee(v)) continue;
    if (used_fees_.insert(v).second) return v;
  }
}

u128 SimEngine::draw_amount() {
  u128 mantissa = 1000 + rng_.below(9000);
  int exp = amount_exp_min_ + static_cast<int>(rng_.below(
                                  static_cast<uint64_t>(amount_exp_max_ - amount_exp_min_ + 1)));
  return mantissa * pow10_u128(exp);
}

int64_t SimEngine::draw_send_timestamp(const Entity& sender) {
  return sender.activity_start +
         static_cast<int64_t>(rng_.below(static_cast<uint64_t>(sender.window_seconds)));
}

std::string SimEngine::fresh_tx_id() {
  std::array<uint8_t, 32> raw;
  rng_.fill(raw);
  return "0x" + to_hex(raw);
}

uint32_t SimEngine::add_entity(const BehaviorProfile& profile) {
  profile.validate();
  const uint32_t id = static_cast<uint32_t>(entities_.size());

  Entity e;
  e.profile = profile;
  e.keys = StealthMetaKeyPair::generate(group_, rng_);
  e.registrant = fresh_address(id);
  e.sender = fresh_address(id);
  if (profile.fee_habit == FeeHabit::Manual) {
    e.manual_fee = profile.manual_fee_wei ? *profile.manual_fee_wei : unique_noisy_fee();
  }
  e.window_seconds = std::max<int64_t>(
      1, static_cast<int64_t>(profile.burstiness.active_window_days * 86400.0));
  e.window_seconds = std::min(e.window_seconds, horizon_seconds_);
  const int64_t latest_start = horizon_seconds_ - e.window_seconds;
  e.activity_start =
      payments_start_ +
      (latest_start > 0 ? static_cast<int64_t>(rng_.below(static_cast<uint64_t>(latest_start)))
                        : 0);

  RegistrationTx reg;
  reg.registrant = e.registrant;
  reg.pk_view = e.keys.pk_view;
  reg.pk_spend = e.keys.pk_spend;
  reg.timestamp = genesis_ + kBlockSeconds * static_cast<int64_t>(id);
  registrations_.push_back(std::move(reg));

  entities_.push_back(std::move(e));
  ground_truth_.flags.push_back(EntityFlags{
      .registrant_reuse = profile.p_withdraw_to_registrant > 0.0,
      .self_test = profile.p_self_test_payment > 0.0,
      .address_reuse = !profile.fresh_withdraw_addresses,
      .manual_fee = profile.fee_habit == FeeHabit::Manual,
  });
  return id;
}

ChainAddress SimEngine::send_payment(uint32_t sender, uint32_t recipient, bool token,
                                     std::optional<int64_t> timestamp) {
  Entity& from = entities_.at(sender);
  Entity& to = entities_.at(recipient);

  Scalar r = group_.random_nonzero_scalar(rng_);
  StealthPayment payment = generate_stealth_payment(group_, to.keys.pk_view, to.keys.pk_spend, r);

  SendTx tx;
  tx.tx_id = fresh_tx_id();
  tx.sender = from.sender;
  tx.stealth_address = payment.stealth_address;
  tx.announcement = Announcement{payment.R, payment.pk_stealth};
  tx.asset = token ? Asset::token(kTokenSymbols[rng_.below(3)]) : Asset::native();
  tx.amount = draw_amount();
  tx.timestamp = timestamp ? *timestamp : draw_send_timestamp(from);

  used_addresses_.insert(payment.stealth_address);
  ground_truth_.stealth_entity[payment.stealth_address] = recipient;

  schedule_withdrawals(recipient, sender == recipient, payment.stealth_address, tx.asset,
                       tx.amount, tx.timestamp);
  sends_.push_back(std::move(tx));
  return payment.stealth_address;
}

void SimEngine::schedule_withdrawals(uint32_t recipient_id, bool self_test,
                                     const ChainAddress& stealth, const Asset& asset, u128 amount,
                                     int64_t send_ts) {
  Entity& e = entities_.at(recipient_id);
  const BehaviorProfile& p = e.profile;

  ChainAddress target;
  if (self_test) {
    target = e.sender;
  } else if (rng_.chance(p.p_withdraw_to_registrant)) {
    target = e.registrant;
  } else if (p.fresh_withdraw_addresses) {
    target = fresh_address(recipient_id);
  } else {
    size_t slot = rng_.below(p.collector_degree);
    while (e.collectors.size() <= slot) e.collectors.push_back(fresh_address(recipient_id));
    target = e.collectors[slot];
  }

  WithdrawTx w;
  w.tx_id = fresh_tx_id();
  w.stealth_address = stealth;
  w.recipient = target;
  w.asset = asset;
  w.timestamp = send_ts + 3600 + static_cast<int64_t>(rng_.below(257400));

  if (!asset.is_native()) {
    w.amount = amount;
    w.via_relayer = true;
    w.max_priority_fee_per_gas = kRelayerFees[rng_.below(3)];
    w.gas_paid = 0;
  } else {
    w.via_relayer = false;
    u128 gas = kWithdrawGasUnits * (kGwei + rng_.below(2 * kGwei));
    if (gas >= amount) gas = 0;
    w.gas_paid = gas;
    if (rng_.chance(p.p_partial_withdraw)) {
      u128 spendable = amount - gas;
      w.amount = std::max<u128>(1, spendable * (50 + rng_.below(40)) / 100);
      if (w.amount >= spendable) w.amount = spendable > 1 ? spendable - 1 : 1;
    } else {
      w.amount = amount - gas;
    }
    if (p.fee_habit == FeeHabit::Manual) {
      w.max_priority_fee_per_gas = *e.manual_fee;
    } else if (rng_.chance(0.8)) {
      w.max_priority_fee_per_gas = kRoundFees[rng_.below(5)];
    } else {
      if (!e.sticky_auto_fee) e.sticky_auto_fee = unique_noisy_fee();
      w.max_priority_fee_per_gas = *e.sticky_auto_fee;
    }
  }
  withdrawals_.push_back(std::move(w));
}

void SimEngine::random_payments(size_t count, double token_fraction) {
  const size_t n = entities_.size();
  if (n < 2) throw std::invalid_argument("random payments need at least 2 entities");

  std::vector<double> cumulative(n);
  double total = 0.0;
  for (size_t i = 0; i < n; ++i) {
    total += entities_[i].profile.burstiness.payments_in_window;
    cumulative[i] = total;
  }

  for (size_t i = 0; i < count; ++i) {
    double pick = rng_.unit() * total;
    uint32_t sender = static_cast<uint32_t>(
        std::lower_bound(cumulative.begin(), cumulative.end(), pick) - cumulative.begin());
    if (sender >= n) sender = static_cast<uint32_t>(n - 1);

    uint32_t recipient;
    if (rng_.chance(entities_[sender].profile.p_self_test_payment)) {
      recipient = sender;
    } else {
      recipient = static_cast<uint32_t>(rng_.below(n - 1));
      if (recipient >= sender) ++recipient;
    }
    send_payment(sender, recipient, rng_.chance(token_fraction));
  }
}

SimOutput SimEngine::finalize() {
  if (finalized_) throw std::logic_error("finalize may only be called once");
  finalized_ = true;

  auto by_time = [](auto& v) {
    std::stable_sort(v.begin(), v.end(),
                     [](const auto& a, const auto& b) { return a.timestamp < b.timestamp; });
  };
  by_time(registrations_);
  by_time(sends_);
  by_time(withdrawals_);

  auto assign_blocks = [&](auto& v) {
    for (auto& tx : v) {
      tx.block = static_cast<uint64_t>((tx.timestamp - genesis_) / kBlockSeconds);
    }
  };
  assign_blocks(registrations_);
  assign_blocks(sends_);
  assign_blocks(withdrawals_);

  SimOutput out;
  out.ledger.chain = chain_;
  out.ledger.registrations = std::move(registrations_);
  out.ledger.sends = std::move(sends_);
  out.ledger.withdrawals = std::move(withdrawals_);
  out.ledger.build_indexes();

  ground_truth_.num_entities = static_cast<uint32_t>(entities_.size());
  out.ground_truth = std::move(ground_truth_);
  return out;
}

SimOutput simulate(const SimConfig& config) {
  config.validate();
  const Group& g = find_group(config.group);
  SimEngine engine(g, config.seed, config.chain, config.horizon_days, config.amount_exp_min,
                   config.amount_exp_max);

  std::vector<ProfileAssignment> assignments = config.profiles;
  if (assignments.empty()) assignments.push_back({profile_preset("default"), 1.0});

  std::vector<double> cumulative(assignments.size());
  double total = 0.0;
  for (size_t i = 0; i < assignments.size(); ++i) {
    total += assignments[i].weight;
    cumulative[i] = total;
  }

  Rng assign_rng = derive_rng(config.seed, 1);
  for (uint32_t i = 0; i < config.entities; ++i) {
    double pick = assign_rng.unit() * total;
    size_t idx = static_cast<size_t>(
        std::lower_bound(cumulative.begin(), cumulative.end(), pick) - cumulative.begin());
    if (idx >= assignments.size()) idx = assignments.size() - 1;
    engine.add_entity(assignments[idx].profile);
  }

  engine.random_payments(config.payments, config.token_fraction);
  return engine.finalize();
}

namespace {

ordered_json profile_to_json(const BehaviorProfile& p) {
  ordered_json o;
  o["name"] = p.name;
  o["p_withdraw_to_registrant"] = p.p_withdraw_to_registrant;
  o["p_self_test_payment"] = p.p_self_test_payment;
  o["collector_degree"] = p.collector_degree;
  o["fresh_withdraw_addresses"] = p.fresh_withdraw_addresses;
  o["p_partial_withdraw"] = p.p_partial_withdraw;
  o["fee_habit"] = p.fee_habit == FeeHabit::Manual ? "manual" : "auto";
  if (p.manual_fee_wei) o["manual_fee_wei"] = u128_to_string(*p.manual_fee_wei);
  o["active_window_days"] = p.burstiness.active_window_days;
  o["payments_in_window"] = p.burstiness.payments_in_window;
  return o;
}

BehaviorProfile profile_from_json(const nlohmann::json& o) {
  BehaviorProfile p;
  if (auto it = o.find("preset"); it != o.end()) {
    if (!it->is_string()) throw std::invalid_argument("profile preset must be a string");
    p = profile_preset(it->get<std::string>());
  }
  auto get_double = [&](const char* key, double& target) {
    if (auto it = o.find(key); it != o.end()) {
      if (!it->is_number()) throw std::invalid_argument(std::string(key) + " must be a number");
      target = it->get<double>();
    }
  };
  if (auto it = o.find("name"); it != o.end()) p.name = it->get<std::string>();
  get_double("p_withdraw_to_registrant", p.p_withdraw_to_registrant);
  get_double("p_self_test_payment", p.p_self_test_payment);
  get_double("p_partial_withdraw", p.p_partial_withdraw);
  get_double("active_window_days", p.burstiness.active_window_days);
  get_double("payments_in_window", p.burstiness.payments_in_window);
  if (auto it = o.find("collector_degree"); it != o.end()) {
    if (!it->is_number_unsigned()) {
      throw std::invalid_argument("collector_degree must be a non-negative integer");
    }
    p.collector_degree = it->get<uint32_t>();
  }
  if (auto it = o.find("fresh_withdraw_addresses"); it != o.end()) {
    p.fresh_withdraw_addresses = it->get<bool>();
  }
  if (auto it = o.find("fee_habit"); it != o.end()) {
    const std::string habit = it->get<std::string>();
    if (habit == "auto") {
      p.fee_habit = FeeHabit::Auto;
    } else if (habit == "manual") {
      p.fee_habit = FeeHabit::Manual;
    } else {
      throw std::invalid_argument("fee_habit must be \"auto\" or \"manual\"");
    }
  }
  if (auto it = o.find("manual_fee_wei"); it != o.end()) {
    auto v = u128_from_string(it->get<std::string>());
    if (!v) throw std::invalid_argument("manual_fee_wei must be a decimal integer string");
    p.manual_fee_wei = *v;
  }
  return p;
}

}  // namespace

SimConfig sim_config_from_json_text(const std::string& text) {
  nlohmann::json o = nlohmann::json::parse(text, nullptr, false);
  if (o.is_discarded() || !o.is_object()) {
    throw std::invalid_argument("simulation config is not a JSON object");
  }
  SimConfig c;
  auto get_u32 = [&](const char* key, uint32_t& target) {
    if (auto it = o.find(key); it != o.end()) {
      if (!it->is_number_unsigned()) {
        throw std::invalid_argument(std::string(key) + " must be a non-negative integer");
      }
      target = it->get<uint32_t>();
    }
  };
  get_u32("entities", c.entities);
  get_u32("payments", c.payments);
  get_u32("horizon_days", c.horizon_days);
  if (auto it = o.find("seed"); it != o.end()) c.seed = it->get<uint64_t>();
  if (auto it = o.find("chain"); it != o.end()) c.chain.name = it->get<std::string>();
  if (auto it = o.find("group"); it != o.end()) c.group = it->get<std::string>();
  if (auto it = o.find("token_fraction"); it != o.end()) c.token_fraction = it->get<double>();
  if (auto it = o.find("amount_exp_min"); it != o.end()) c.amount_exp_min = it->get<int>();
  if (auto it = o.find("amount_exp_max"); it != o.end()) c.amount_exp_max = it->get<int>();
  if (auto it = o.find("profiles"); it != o.end()) {
    if (!it->is_array()) throw std::invalid_argument("profiles must be an array");
    for (const auto& entry : *it) {
      if (!entry.is_object()) throw std::invalid_argument("profiles entries must be objects");
      ProfileAssignment a;
      a.profile = profile_from_json(entry);
      if (auto w = entry.find("weight"); w != entry.end()) a.weight = w->get<double>();
      c.profiles.push_back(std::move(a));
    }
  }
  c.validate();
  return c;
}

std::string sim_config_to_json_text(const SimConfig& c) {
  ordered_json o;
  o["entities"] = c.entities;
  o["payments"] = c.payments;
  o["seed"] = c.seed;
  o["chain"] = c.chain.name;
  o["group"] = c.group;
  o["token_fraction"] = c.token_fraction;
  o["horizon_days"] = c.horizon_days;
  o["amount_exp_min"] = c.amount_exp_min;
  o["amount_exp_max"] = c.amount_exp_max;
  ordered_json profiles = ordered_json::array();
  std::vector<ProfileAssignment> assignments = c.profiles;
  if (assignments.empty()) assignments.push_back({profile_preset("default"), 1.0});
  for (const ProfileAssignment& a : assignments) {
    ordered_json p = profile_to_json(a.profile);
    p["weight"] = a.weight;
    profiles.push_back(std::move(p));
  }
  o["profiles"] = std::move(profiles);
  return o.dump(2);
}

}  // namespace umbra

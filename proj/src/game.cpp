#include "umbra/game.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "umbra/group.hpp"
#include "umbra/hash.hpp"

namespace umbra {

using nlohmann::ordered_json;

namespace {

int compare_withdraw_addresses(const ChallengeTranscript& t, Rng&) {
  auto recipient_of = [&](size_t send_idx) -> const ChainAddress* {
    const ChainAddress& st = t.ledger.sends.at(send_idx).stealth_address;
    auto it = t.ledger.withdrawals_by_stealth.find(st);
    if (it == t.ledger.withdrawals_by_stealth.end() || it->second.empty()) return nullptr;
    return &t.ledger.withdrawals[it->second.front()].recipient;
  };
  const ChainAddress* a = recipient_of(t.first_challenge_send);
  const ChainAddress* b = recipient_of(t.second_challenge_send);
  return (a && b && *a == *b) ? 0 : 1;
}

int hash_announcement_bytes(const ChallengeTranscript& t, Rng&) {
  std::vector<uint8_t> bytes;
  for (size_t idx : {t.first_challenge_send, t.second_challenge_send}) {
    const SendTx& s = t.ledger.sends.at(idx);
    bytes.insert(bytes.end(), s.announcement.R.data.begin(), s.announcement.R.data.end());
    bytes.insert(bytes.end(), s.announcement.pk_stealth.data.begin(),
                 s.announcement.pk_stealth.data.end());
  }
  return sha256(bytes)[0] & 1;
}

}  // namespace

std::vector<std::string> strategy_names() {
  return {"random", "withdraw-address", "announcement-bytes"};
}

AdversaryStrategy make_strategy(const std::string& name) {
  if (name == "random") {
    return {"random",
            [](const ChallengeTranscript&, Rng& rng) { return static_cast<int>(rng.below(2)); }};
  }
  if (name == "withdraw-address") return {"withdraw-address", compare_withdraw_addresses};
  if (name == "announcement-bytes") return {"announcement-bytes", hash_announcement_bytes};
  throw std::invalid_argument("unknown strategy: " + name);
}

void GameConfig::validate() const {
  if (trials == 0) throw std::invalid_argument("trials must be at least 1");
  if (!(token_fraction >= 0.0 && token_fraction <= 1.0)) {
    throw std::invalid_argument("token_fraction must lie in [0, 1]");
  }
  recipient_profile.validate();
  find_group(group);
}

TrialOutcome run_ru_trial(const AdversaryStrategy& strategy, const GameConfig& config,
                          uint32_t trial) {
  config.validate();
  if (!strategy.decide) throw std::invalid_argument("strategy has no decision procedure");

  Rng rng = derive_rng(config.seed, trial);
  const Group& g = find_group(config.group);
  SimEngine engine(g, rng.next_u64(), ChainId{"simnet"});

  uint32_t r0 = engine.add_entity(config.recipient_profile);
  uint32_t r1 = engine.add_entity(config.recipient_profile);
  uint32_t s = engine.add_entity(profile_preset("default"));
  for (uint32_t i = 0; i < config.background_entities; ++i) {
    engine.add_entity(profile_preset("default"));
  }
  engine.random_payments(config.background_payments, config.token_fraction);

  int c = static_cast<int>(rng.below(2));
  int b = static_cast<int>(rng.below(2));
  uint32_t first = c == 0 ? r0 : r1;
  uint32_t second = b == 0 ? first : (c == 0 ? r1 : r0);
  ChainAddress st_first = engine.send_payment(s, first, false);
  ChainAddress st_second = engine.send_payment(s, second, false);

  ChallengeTranscript transcript;
  transcript.sender = engine.entity_sender_address(s);
  transcript.target0_registrant = engine.entity_registrant(r0);
  transcript.target1_registrant = engine.entity_registrant(r1);
  transcript.ledger = engine.finalize().ledger;
  transcript.first_challenge_send = transcript.ledger.sends_by_stealth.at(st_first).front();
  transcript.second_challenge_send = transcript.ledger.sends_by_stealth.at(st_second).front();

  TrialOutcome outcome;
  outcome.challenge_bit = b;
  outcome.guess = strategy.decide(transcript, rng);
  outcome.success = outcome.guess == b;
  return outcome;
}

GameResult run_ru_game(const AdversaryStrategy& strategy, const GameConfig& config) {
  config.validate();
  GameResult result;
  result.strategy = strategy.name;
  result.trials = config.trials;
  for (uint32_t t = 0; t < config.trials; ++t) {
    TrialOutcome outcome = run_ru_trial(strategy, config, t);
    result.successes += outcome.success ? 1 : 0;
    result.challenge_bit_ones += static_cast<uint32_t>(outcome.challenge_bit);
  }
  const double n = static_cast<double>(config.trials);
  result.success_rate = static_cast<double>(result.successes) / n;
  result.advantage = std::abs(result.success_rate - 0.5);
  const double se = std::sqrt(result.success_rate * (1.0 - result.success_rate) / n);
  result.ci95_low = std::max(0.0, result.success_rate - 1.96 * se);
  result.ci95_high = std::min(1.0, result.success_rate + 1.96 * se);
  return result;
}

std::string game_result_to_json_text(const GameResult& result) {
  ordered_json o;
  o["strategy"] = result.strategy;
  o["trials"] = result.trials;
  o["successes"] = result.successes;
  o["challenge_bit_ones"] = result.challenge_bit_ones;
  o["success_rate"] = result.success_rate;
  o["advantage"] = result.advantage;
  o["ci95_low"] = result.ci95_low;
  o["ci95_high"] = result.ci95_high;
  return o.dump(2);
}

}  // namespace umbra

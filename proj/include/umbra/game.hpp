#pragma once

#include <cstdint>
#include <functional>
#include <string>

#include "umbra/ledger.hpp"
#include "umbra/rng.hpp"
#include "umbra/simulate.hpp"

namespace umbra {

/// Everything the adversary may look at: the public ledger plus which two
/// send records are the challenge payments. Deliberately carries no ground
/// truth, so strategies cannot cheat by construction.
struct ChallengeTranscript {
  Ledger ledger;
  size_t first_challenge_send = 0;
  size_t second_challenge_send = 0;
  /// Public addresses of the target sender and the two candidate recipients.
  ChainAddress sender;
  ChainAddress target0_registrant;
  ChainAddress target1_registrant;
};

/// Guesses 0 when the two challenge payments look like they went to the same
/// recipient, 1 when they look unrelated. The rng argument is the only
/// randomness a strategy may use.
struct AdversaryStrategy {
  std::string name;
  std::function<int(const ChallengeTranscript&, Rng&)> decide;
};

/// Built-in strategies:
///   "random": coin flip, the no-information baseline.
///   "withdraw-address": same guess as the collector pattern, links the two
///     payments when they were withdrawn to the same address.
///   "announcement-bytes": a function of the on-chain announcement bytes
///     alone, ignoring withdrawals.
/// Throws std::invalid_argument on unknown names.
AdversaryStrategy make_strategy(const std::string& name);

/// Names make_strategy accepts, in a stable order.
std::vector<std::string> strategy_names();

struct GameConfig {
  uint32_t trials = 200;
  uint64_t seed = 1;
  /// Both challenge recipients draw their withdrawal behavior from this.
  BehaviorProfile recipient_profile = profile_preset("collector");
  uint32_t background_entities = 4;
  uint32_t background_payments = 6;
  double token_fraction = 0.25;
  std::string group = "production";

  /// Throws std::invalid_argument when trials is zero, the fraction leaves
  /// [0, 1], the group is unknown, or the profile fails validation.
  void validate() const;
};

struct TrialOutcome {
  int challenge_bit = 0;
  int guess = 0;
  bool success = false;
};

/// One self-contained round, a pure function of (config.seed, trial): builds
/// a fresh population, picks a secret coin c for the first challenge
/// recipient and a challenge bit b, routes the second payment to the same
/// recipient when b = 0 and to the other target when b = 1, then asks the
/// strategy for its guess on the public transcript. Both challenge payments
/// come from the same sender; recipients withdraw per their profile.
TrialOutcome run_ru_trial(const AdversaryStrategy& strategy, const GameConfig& config,
                          uint32_t trial);

struct GameResult {
  std::string strategy;
  uint32_t trials = 0;
  uint32_t successes = 0;
  /// How often the challenge bit came up 1, for uniformity checks.
  uint32_t challenge_bit_ones = 0;
  double success_rate = 0.0;
  /// |success_rate - 1/2|.
  double advantage = 0.0;
  /// 95% normal-approximation interval on the success rate.
  double ci95_low = 0.0;
  double ci95_high = 0.0;
};

GameResult run_ru_game(const AdversaryStrategy& strategy, const GameConfig& config);

std::string game_result_to_json_text(const GameResult& result);

}  // namespace umbra

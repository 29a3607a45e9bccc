#include <doctest.h>
#include <json.hpp>

#include "umbra/game.hpp"

using namespace umbra;

// The adversary's view is ledger data only; there is no ground-truth member
// to peek at.
template <typename T>
concept exposes_ground_truth = requires(const T& t) { t.ground_truth; } ||
                               requires(const T& t) { t.gt; };
static_assert(!exposes_ground_truth<ChallengeTranscript>);

TEST_SUITE("game") {

TEST_CASE("config and strategy lookup reject bad inputs") {
  GameConfig ok;
  ok.group = "toy101";
  CHECK_NOTHROW(ok.validate());

  GameConfig c = ok;
  c.trials = 0;
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
  c = ok;
  c.group = "zmod7";
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
  c = ok;
  c.token_fraction = 1.5;
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
  c = ok;
  c.recipient_profile.p_partial_withdraw = 2.0;
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);

  CHECK_THROWS_AS(make_strategy("oracle"), std::invalid_argument);
  CHECK(make_strategy("random").name == "random");
  CHECK(make_strategy("withdraw-address").name == "withdraw-address");
  CHECK(make_strategy("announcement-bytes").name == "announcement-bytes");
}

TEST_CASE("random guessing stays at the coin-flip baseline") {
  GameConfig config;
  config.trials = 2000;
  config.seed = 41;
  config.group = "toy101";
  config.background_entities = 2;
  config.background_payments = 2;
  GameResult r = run_ru_game(make_strategy("random"), config);

  CHECK(r.trials == 2000);
  CHECK(r.advantage >= 0.0);
  CHECK(r.advantage <= 0.05);
  CHECK(r.ci95_low <= r.success_rate);
  CHECK(r.success_rate <= r.ci95_high);

  // Challenge bits are fair: within 3 standard errors of half the trials.
  double se = std::sqrt(2000.0 * 0.25);
  CHECK(std::abs(static_cast<double>(r.challenge_bit_ones) - 1000.0) <= 3.0 * se);
}

TEST_CASE("withdraw address comparison breaks single-collector recipients") {
  BehaviorProfile collector = profile_preset("collector");
  collector.p_withdraw_to_registrant = 0.0;
  collector.p_self_test_payment = 0.0;
  collector.p_partial_withdraw = 0.0;

  GameConfig config;
  config.trials = 200;
  config.seed = 42;
  config.recipient_profile = collector;
  GameResult r = run_ru_game(make_strategy("withdraw-address"), config);

  CHECK(r.success_rate >= 0.95);
  CHECK(r.advantage >= 0.45);
}

TEST_CASE("fresh withdraw addresses restore unlinkability") {
  GameConfig config;
  config.trials = 800;
  config.seed = 43;
  config.recipient_profile = profile_preset("countermeasure");
  config.background_entities = 2;
  config.background_payments = 3;
  GameResult r = run_ru_game(make_strategy("withdraw-address"), config);

  CHECK(r.advantage <= 0.05);
}

TEST_CASE("announcement bytes alone carry no signal even against collectors") {
  GameConfig config;
  config.trials = 800;
  config.seed = 44;
  config.recipient_profile = profile_preset("collector");
  config.background_entities = 2;
  config.background_payments = 3;
  GameResult r = run_ru_game(make_strategy("announcement-bytes"), config);

  CHECK(r.advantage <= 0.05);
}

TEST_CASE("trials derive purely from seed and index") {
  GameConfig config;
  config.trials = 12;
  config.seed = 77;
  config.group = "toy101";
  config.background_entities = 2;
  config.background_payments = 2;
  AdversaryStrategy strat = make_strategy("withdraw-address");

  TrialOutcome once = run_ru_trial(strat, config, 5);
  TrialOutcome again = run_ru_trial(strat, config, 5);
  CHECK(once.challenge_bit == again.challenge_bit);
  CHECK(once.guess == again.guess);
  CHECK(once.success == again.success);

  GameResult run = run_ru_game(strat, config);
  uint32_t successes = 0;
  for (uint32_t t = 0; t < config.trials; ++t) {
    successes += run_ru_trial(strat, config, t).success ? 1 : 0;
  }
  CHECK(run.successes == successes);
  CHECK(game_result_to_json_text(run) == game_result_to_json_text(run_ru_game(strat, config)));

  auto parsed = nlohmann::json::parse(game_result_to_json_text(run));
  CHECK(parsed["strategy"] == "withdraw-address");
  CHECK(parsed["trials"] == 12);
  CHECK(parsed["successes"] == run.successes);
  CHECK(parsed.contains("advantage"));
  CHECK(parsed.contains("ci95_low"));
  CHECK(parsed.contains("ci95_high"));
}

TEST_CASE("transcript shows the challenge payments in public terms") {
  GameConfig config;
  config.trials = 1;
  config.seed = 7;
  config.group = "toy101";
  config.background_entities = 2;
  config.background_payments = 3;

  ChallengeTranscript seen;
  bool called = false;
  AdversaryStrategy capture{"capture", [&](const ChallengeTranscript& t, Rng&) {
                              seen = t;
                              called = true;
                              return 0;
                            }};
  run_ru_trial(capture, config, 0);
  REQUIRE(called);

  REQUIRE(seen.ledger.sends.size() >= 2);
  CHECK(seen.first_challenge_send != seen.second_challenge_send);
  const SendTx& a = seen.ledger.sends.at(seen.first_challenge_send);
  const SendTx& b = seen.ledger.sends.at(seen.second_challenge_send);
  CHECK(a.sender == seen.sender);
  CHECK(b.sender == seen.sender);

  bool target0_registered = false;
  bool target1_registered = false;
  for (const RegistrationTx& r : seen.ledger.registrations) {
    target0_registered = target0_registered || r.registrant == seen.target0_registrant;
    target1_registered = target1_registered || r.registrant == seen.target1_registrant;
  }
  CHECK(target0_registered);
  CHECK(target1_registered);
}

}  // TEST_SUITE

#pragma once

#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "umbra/ledger.hpp"
#include "umbra/rng.hpp"
#include "umbra/stealth.hpp"

namespace umbra {

enum class FeeHabit { Auto, Manual };

struct Burstiness {
  double active_window_days = 10.0;
  /// Relative sender weight: entities with more payments in their window
  /// originate proportionally more of the traffic.
  double payments_in_window = 5.0;
};

struct BehaviorProfile {
  std::string name = "default";
  double p_withdraw_to_registrant = 0.0;
  double p_self_test_payment = 0.0;
  /// Number of distinct collection addresses the entity cycles through for
  /// ordinary withdrawals.
  uint32_t collector_degree = 1;
  /// Overrides collector reuse with a fresh address per withdrawal.
  bool fresh_withdraw_addresses = false;
  double p_partial_withdraw = 0.0;
  FeeHabit fee_habit = FeeHabit::Auto;
  /// Fixed fee for Manual habit; when empty each entity draws its own
  /// globally unique value at creation.
  std::optional<u128> manual_fee_wei;
  Burstiness burstiness;

  /// Throws std::invalid_argument when probabilities leave [0,1],
  /// collector_degree is zero, or a manual fee value is zero.
  void validate() const;
};

/// Named starting points: "default", "collector", "registrant_reuser",
/// "self_tester", "manual_fee", "countermeasure". Throws on unknown names.
BehaviorProfile profile_preset(const std::string& name);

/// No address reuse of any kind: withdrawals always to fresh addresses,
/// never to the registrant, no self-test payments, auto fees.
BehaviorProfile countermeasure_profile();

struct ProfileAssignment {
  BehaviorProfile profile;
  double weight = 1.0;
};

struct SimConfig {
  uint32_t entities = 10;
  uint32_t payments = 50;
  uint64_t seed = 1;
  ChainId chain{"simnet"};
  std::string group = "production";
  double token_fraction = 0.25;
  uint32_t horizon_days = 30;
  /// Payment amounts are log-uniform: a four-digit mantissa times a power of
  /// ten drawn from [amount_exp_min, amount_exp_max].
  int amount_exp_min = 13;
  int amount_exp_max = 16;
  /// Entities draw a profile from this list by weight; empty means every
  /// entity uses the "default" preset.
  std::vector<ProfileAssignment> profiles;

  void validate() const;
};

SimConfig sim_config_from_json_text(const std::string& text);
std::string sim_config_to_json_text(const SimConfig& config);

struct SimOutput {
  Ledger ledger;
  GroundTruth ground_truth;
};

/// Drives the five-step flow one payment at a time: registration on entity
/// creation, announcement + transfer on send, withdrawal per the recipient's
/// profile. Everything the engine emits is a pure function of the seed and
/// the call sequence.
class SimEngine {
 public:
  SimEngine(const Group& g, uint64_t seed, ChainId chain, uint32_t horizon_days = 30,
            int amount_exp_min = 13, int amount_exp_max = 16);

  uint32_t add_entity(const BehaviorProfile& profile);
  uint32_t entity_count() const { return static_cast<uint32_t>(entities_.size()); }
  const StealthMetaKeyPair& entity_keys(uint32_t id) const { return entities_.at(id).keys; }
  ChainAddress entity_registrant(uint32_t id) const { return entities_.at(id).registrant; }
  ChainAddress entity_sender_address(uint32_t id) const { return entities_.at(id).sender; }

  /// One stealth payment from sender to recipient, with the withdrawal(s)
  /// scheduled immediately per the recipient's profile. A payment to self is
  /// withdrawn back to the sender's visible address. Returns the stealth
  /// address of the payment.
  ChainAddress send_payment(uint32_t sender, uint32_t recipient, bool token,
                            std::optional<int64_t> timestamp = {});

  /// Config-driven traffic: weighted sender choice, self-test or uniform
  /// recipient choice, token share per token_fraction.
  void random_payments(size_t count, double token_fraction);

  /// Call once; assembles the sorted ledger and the ground truth.
  SimOutput finalize();

 private:
  struct Entity {
    BehaviorProfile profile;
    StealthMetaKeyPair keys;
    ChainAddress registrant;
    ChainAddress sender;
    std::vector<ChainAddress> collectors;
    std::optional<u128> manual_fee;
    std::optional<u128> sticky_auto_fee;
    int64_t activity_start = 0;
    int64_t window_seconds = 0;
  };

  ChainAddress fresh_address(uint32_t owner);
  u128 unique_noisy_fee();
  u128 draw_amount();
  int64_t draw_send_timestamp(const Entity& sender);
  void schedule_withdrawals(uint32_t recipient_id, bool self_test, const ChainAddress& stealth,
                            const Asset& asset, u128 amount, int64_t send_ts);
  std::string fresh_tx_id();

  const Group& group_;
  Rng rng_;
  ChainId chain_;
  int64_t genesis_;
  int64_t payments_start_;
  int64_t horizon_seconds_;
  int amount_exp_min_;
  int amount_exp_max_;

  std::vector<Entity> entities_;
  std::vector<RegistrationTx> registrations_;
  std::vector<SendTx> sends_;
  std::vector<WithdrawTx> withdrawals_;
  std::set<ChainAddress> used_addresses_;
  std::set<u128> used_fees_;
  GroundTruth ground_truth_;
  bool finalized_ = false;
};

/// Full config-driven run. Throws std::invalid_argument on inconsistent
/// configs (fewer than 2 entities, zero payments, bad fractions).
SimOutput simulate(const SimConfig& config);

}  // namespace umbra

#include <doctest.h>

#include <cmath>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "fixture_ledger.hpp"
#include "reference_heuristics.hpp"
#include "umbra/heuristics.hpp"
#include "umbra/ledger.hpp"
#include "umbra/rng.hpp"
#include "umbra/simulate.hpp"

using namespace umbra;

namespace {

using fixture::A;
using fixture::LedgerBuilder;

// Adversarial small ledgers: overlapping address roles, stealth reuse,
// multiple or missing withdrawals, shared fees around the threshold.
Ledger random_ledger(Rng& rng) {
  LedgerBuilder b;
  const uint64_t n_reg = 3 + rng.below(5);
  for (uint64_t i = 0; i < n_reg; ++i) b.reg(1 + i, 1 + i);

  auto pick_sender = [&]() -> uint64_t {
    return rng.chance(0.3) ? 1 + rng.below(n_reg) : 50 + rng.below(6);
  };

  std::vector<uint64_t> stealths;
  uint64_t next_stealth = 100;
  const size_t payments = 10 + rng.below(50);
  for (size_t i = 0; i < payments; ++i) {
    uint64_t st;
    if (!stealths.empty() && rng.chance(0.15)) {
      st = stealths[rng.below(stealths.size())];
    } else {
      st = next_stealth++;
      stealths.push_back(st);
    }
    b.send(pick_sender(), st, 100 + rng.below(900), !rng.chance(0.3),
           1000 + static_cast<uint64_t>(i));
  }

  uint64_t fresh_recipient = 200;
  uint64_t unique_fee = 1000;
  uint64_t block = 2000;
  auto pick_recipient = [&]() -> uint64_t {
    double roll = rng.unit();
    if (roll < 0.25) return 1 + rng.below(n_reg);
    if (roll < 0.45) return 50 + rng.below(6);
    if (roll < 0.80) return 70 + rng.below(4);
    if (roll < 0.90 && !stealths.empty()) return stealths[rng.below(stealths.size())];
    return fresh_recipient++;
  };
  auto pick_fee = [&]() -> u128 {
    return rng.chance(0.8) ? u128{10 + rng.below(5)} : u128{unique_fee++};
  };

  for (uint64_t st : stealths) {
    u128 received = 0;
    bool has_native = false;
    bool has_token = false;
    for (const SendTx& s : b.ledger.sends) {
      if (s.stealth_address != A(st)) continue;
      if (s.asset.is_native()) {
        received += s.amount;
        has_native = true;
      } else {
        has_token = true;
      }
    }

    double roll = rng.unit();
    int count = roll < 0.10 ? 0 : roll < 0.72 ? 1 : 2;
    for (int k = 0; k < count; ++k) {
      bool native = has_native && (!has_token || rng.chance(0.7));
      u128 gas = 0;
      u128 amount;
      if (native) {
        gas = rng.chance(0.3) ? u128{rng.below(20)} : u128{0};
        if (gas >= received) gas = 0;
        if (count == 1 && rng.chance(0.6)) {
          amount = received - gas;
        } else {
          amount = received / (2 + k);
          if (amount + gas > received) amount = received - gas;
        }
      } else {
        amount = 100 + rng.below(400);
      }
      bool relayer = !native && rng.chance(0.5);
      b.withdraw(st, pick_recipient(), amount, gas, pick_fee(), native, relayer, block++);
    }
  }

  // Withdrawals whose stealth address never received a recorded send.
  const size_t orphans = rng.below(3);
  for (size_t i = 0; i < orphans; ++i) {
    b.withdraw(next_stealth++, pick_recipient(), 50, 0, pick_fee(), false, rng.chance(0.5),
               block++);
  }
  return b.done();
}

}  // namespace

TEST_SUITE("heuristics") {

TEST_CASE("cluster set partitions are stable under merge order") {
  ClusterSet a;
  a.merge(A(1), A(2), HeuristicId::H3);
  a.merge(A(3), A(4), HeuristicId::H4);
  a.merge(A(2), A(3), HeuristicId::H3);

  ClusterSet b;
  b.add(A(1));
  b.add(A(2));
  b.add(A(3));
  b.add(A(4));
  b.merge(A(2), A(3), HeuristicId::H3);
  b.merge(A(3), A(4), HeuristicId::H4);
  b.merge(A(1), A(2), HeuristicId::H3);

  CHECK(a.partitions() == b.partitions());
  REQUIRE(a.partitions().size() == 1);
  CHECK(a.partitions()[0] == std::vector<ChainAddress>{A(1), A(2), A(3), A(4)});
  CHECK(a.same_cluster(A(1), A(4)));
  CHECK(a.member_count() == 4);
  CHECK(a.merges().size() == 3);

  // A self merge records nothing, but duplicate evidence between already
  // linked members does.
  a.merge(A(1), A(1), HeuristicId::H4);
  CHECK(a.merges().size() == 3);
  a.merge(A(1), A(3), HeuristicId::H4);
  CHECK(a.merges().size() == 4);
  CHECK(a.partitions().size() == 1);

  CHECK_FALSE(a.contains(A(9)));
  CHECK_FALSE(a.same_cluster(A(1), A(9)));
  a.add(A(9));
  CHECK(a.partitions().size() == 2);
  CHECK_FALSE(a.same_cluster(A(1), A(9)));
}

TEST_CASE("absorb unions partitions and keeps provenance") {
  ClusterSet h3;
  h3.merge(A(1), A(2), HeuristicId::H3);
  h3.merge(A(1), A(20), HeuristicId::H3);
  ClusterSet h4;
  h4.merge(A(2), A(3), HeuristicId::H4);

  ClusterSet all;
  all.absorb(h3);
  all.absorb(h4);
  CHECK(all.partitions().size() == 1);
  CHECK(all.same_cluster(A(1), A(3)));
  CHECK(all.merges().size() == 3);
  CHECK(all.merges()[2].via == HeuristicId::H4);
}

TEST_CASE("config rejects a zero threshold") {
  HeuristicConfig c;
  CHECK(c.fee_uniqueness_threshold == 5);
  CHECK_NOTHROW(c.validate());
  c.fee_uniqueness_threshold = 0;
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
}

TEST_CASE("registrant reuse links the full withdrawal to the registrant") {
  LedgerBuilder b;
  b.reg(1);
  b.send(10, 100, 500);
  b.withdraw(100, 1, 500);
  Ledger l = b.done();

  auto findings = h1_registrant_reuse(l);
  REQUIRE(findings.size() == 1);
  CHECK(findings[0].stealth_address == A(100));
  CHECK(findings[0].attributed_identity == A(1));
  CHECK(findings[0].identity_kind == IdentityKind::Registrant);
  CHECK(findings[0].heuristic_id == HeuristicId::H1);
}

TEST_CASE("registrant reuse needs a registrant recipient and a single withdrawal") {
  SUBCASE("recipient never registered") {
    LedgerBuilder b;
    b.reg(1);
    b.send(10, 100, 500);
    b.withdraw(100, 2, 500);
    CHECK(h1_registrant_reuse(b.done()).empty());
  }
  SUBCASE("two withdrawals, one to a registrant") {
    LedgerBuilder b;
    b.reg(1);
    b.send(10, 100, 500);
    b.withdraw(100, 1, 300, 0, 1, true, false, 200);
    b.withdraw(100, 3, 200, 0, 1, true, false, 201);
    CHECK(h1_registrant_reuse(b.done()).empty());
  }
  SUBCASE("partial withdrawal to a registrant") {
    LedgerBuilder b;
    b.reg(1);
    b.send(10, 100, 500);
    b.withdraw(100, 1, 400);
    CHECK(h1_registrant_reuse(b.done()).empty());
  }
}

TEST_CASE("sender matching links a round trip back to the sender") {
  LedgerBuilder b;
  b.send(10, 100, 500);
  b.withdraw(100, 10, 500);
  Ledger l = b.done();

  auto findings = h2_same_sender_receiver(l);
  REQUIRE(findings.size() == 1);
  CHECK(findings[0].stealth_address == A(100));
  CHECK(findings[0].attributed_identity == A(10));
  CHECK(findings[0].identity_kind == IdentityKind::Sender);
  CHECK(findings[0].heuristic_id == HeuristicId::H2);

  SUBCASE("different recipient") {
    LedgerBuilder c;
    c.send(10, 100, 500);
    c.withdraw(100, 11, 500);
    CHECK(h2_same_sender_receiver(c.done()).empty());
  }
  SUBCASE("split withdrawal back to the sender") {
    LedgerBuilder c;
    c.send(10, 100, 500);
    c.withdraw(100, 10, 300, 0, 1, true, false, 200);
    c.withdraw(100, 11, 200, 0, 1, true, false, 201);
    CHECK(h2_same_sender_receiver(c.done()).empty());
  }
}

TEST_CASE("collector pattern clusters stealth addresses behind one recipient") {
  LedgerBuilder b;
  for (uint64_t i = 0; i < 3; ++i) {
    b.send(10 + i, 101 + i, 500);
    b.withdraw(101 + i, 20, 500, 0, 1, true, false, 200 + i);
  }
  // A fourth stealth address pays the same recipient twice, so it stays out.
  b.send(14, 104, 500);
  b.withdraw(104, 20, 250, 0, 1, true, false, 210);
  b.withdraw(104, 20, 250, 0, 1, true, false, 211);
  Ledger l = b.done();

  ClusterSet clusters = h3_collector_pattern(l);
  auto parts = clusters.partitions();
  REQUIRE(parts.size() == 1);
  CHECK(parts[0] == std::vector<ChainAddress>{A(101), A(102), A(103), A(20)});
  CHECK_FALSE(clusters.contains(A(104)));
  for (const Merge& m : clusters.merges()) CHECK(m.via == HeuristicId::H3);
}

TEST_CASE("distinct collectors leave only singletons") {
  LedgerBuilder b;
  for (uint64_t i = 0; i < 3; ++i) {
    b.send(10, 101 + i, 500);
    b.withdraw(101 + i, 20 + i, 500, 0, 1, true, false, 200 + i);
  }
  ClusterSet clusters = h3_collector_pattern(b.done());
  auto parts = clusters.partitions();
  CHECK(parts.size() == 3);
  for (const auto& p : parts) CHECK(p.size() == 1);
  CHECK(clusters.merges().empty());
}

TEST_CASE("rare fee values cluster their stealth addresses") {
  LedgerBuilder b;
  b.send(10, 101, 500);
  b.send(11, 102, 600);
  b.send(12, 103, 700);
  b.withdraw(101, 30, 500, 0, 1234567, true, false, 200);
  b.withdraw(102, 31, 600, 0, 1234567, true, false, 201);
  b.withdraw(103, 32, 700, 0, 7777777, true, false, 202);
  Ledger l = b.done();

  ClusterSet clusters = h4_unique_priority_fee(l);
  auto parts = clusters.partitions();
  REQUIRE(parts.size() == 1);
  CHECK(parts[0] == std::vector<ChainAddress>{A(101), A(102)});
  for (const Merge& m : clusters.merges()) CHECK(m.via == HeuristicId::H4);
  CHECK_FALSE(clusters.contains(A(103)));
}

TEST_CASE("popular and relayer set fees never cluster") {
  SUBCASE("fee shared six times exceeds the threshold") {
    LedgerBuilder b;
    for (uint64_t i = 0; i < 6; ++i) {
      b.send(10, 101 + i, 500);
      b.withdraw(101 + i, 30 + i, 500, 0, 42, true, false, 200 + i);
    }
    CHECK(h4_unique_priority_fee(b.done()).member_count() == 0);
  }
  SUBCASE("six sharers pass once the threshold is raised") {
    LedgerBuilder b;
    for (uint64_t i = 0; i < 6; ++i) {
      b.send(10, 101 + i, 500);
      b.withdraw(101 + i, 30 + i, 500, 0, 42, true, false, 200 + i);
    }
    HeuristicConfig cfg;
    cfg.fee_uniqueness_threshold = 6;
    CHECK(h4_unique_priority_fee(b.done(), cfg).member_count() == 6);
  }
  SUBCASE("relayer withdrawals are ignored") {
    LedgerBuilder b;
    b.send(10, 101, 500, false);
    b.send(11, 102, 600, false);
    b.withdraw(101, 30, 500, 0, 1234567, false, true, 200);
    b.withdraw(102, 31, 600, 0, 1234567, false, true, 201);
    CHECK(h4_unique_priority_fee(b.done()).member_count() == 0);
  }
  SUBCASE("one stealth address using a fee twice links nothing") {
    LedgerBuilder b;
    b.send(10, 101, 500);
    b.withdraw(101, 30, 200, 0, 1234567, true, false, 200);
    b.withdraw(101, 31, 300, 0, 1234567, true, false, 201);
    CHECK(h4_unique_priority_fee(b.done()).member_count() == 0);
  }
}

TEST_CASE("combine counts each stealth address once and merges partitions") {
  SUBCASE("stealth linked by both heuristics") {
    LedgerBuilder b;
    b.reg(10);
    b.send(10, 100, 500);
    b.withdraw(100, 10, 500);
    Ledger l = b.done();
    LinkageReport report = run_all_heuristics(l);
    CHECK(report.h1.size() == 1);
    CHECK(report.h2.size() == 1);
    CHECK(report.total_linked == 1);
    REQUIRE(report.consolidated.size() == 1);
    CHECK(report.consolidated[0].identity_kind == IdentityKind::Registrant);
  }
  SUBCASE("empty ledger") {
    Ledger l;
    l.chain = ChainId{"fixture"};
    l.build_indexes();
    LinkageReport report = run_all_heuristics(l);
    CHECK(report.total_linked == 0);
    CHECK(report.h1.empty());
    CHECK(report.h2.empty());
    CHECK(report.consolidated.empty());
    CHECK(report.clusters.member_count() == 0);
  }
  SUBCASE("clusters sharing a stealth address merge across heuristics") {
    ClusterSet h3;
    h3.merge(A(101), A(102), HeuristicId::H3);
    h3.merge(A(101), A(20), HeuristicId::H3);
    ClusterSet h4;
    h4.merge(A(102), A(103), HeuristicId::H4);
    LinkageReport report = combine({}, {}, h3, h4);
    auto parts = report.clusters.partitions();
    REQUIRE(parts.size() == 1);
    CHECK(parts[0] == std::vector<ChainAddress>{A(101), A(102), A(20), A(103)});
  }
}

TEST_CASE("report serializes deterministically with provenance") {
  LedgerBuilder b;
  b.reg(1);
  b.send(10, 100, 500);
  b.withdraw(100, 1, 500, 0, 777, true, false, 200);
  b.send(11, 101, 600);
  b.withdraw(101, 1, 600, 0, 777, true, false, 201);
  Ledger l = b.done();

  LinkageReport report = run_all_heuristics(l);
  std::string text = linkage_report_to_json_text(report);
  CHECK(text == linkage_report_to_json_text(run_all_heuristics(l)));

  auto o = nlohmann::json::parse(text);
  CHECK(o["total_linked"] == 2);
  CHECK(o["counts"]["h1"] == 2);
  CHECK(o["counts"]["h2"] == 0);
  CHECK(o["counts"]["clusters"] == 1);
  REQUIRE(o["clusters"].size() == 1);
  CHECK(o["clusters"][0]["members"].size() == 3);
  std::set<std::string> sources;
  for (const auto& s : o["clusters"][0]["sources"]) sources.insert(s.get<std::string>());
  CHECK(sources == std::set<std::string>{"H3", "H4"});
  for (const auto& m : o["merges"]) {
    CHECK((m["via"] == "H3" || m["via"] == "H4"));
  }
}

TEST_CASE("heuristics agree with the quadratic reference on random ledgers") {
  size_t nonempty_h1 = 0;
  size_t nonempty_clusters = 0;
  for (uint64_t trial = 0; trial < 50; ++trial) {
    Rng rng(9000 + trial);
    Ledger l = random_ledger(rng);
    HeuristicConfig cfg;
    cfg.fee_uniqueness_threshold = 2 + static_cast<uint32_t>(trial % 5);

    CAPTURE(trial);
    CHECK(refimpl::normalize(h1_registrant_reuse(l)) == refimpl::ref_h1(l));
    CHECK(refimpl::normalize(h2_same_sender_receiver(l)) == refimpl::ref_h2(l));
    CHECK(refimpl::normalize(h3_collector_pattern(l)) == refimpl::ref_h3(l));
    CHECK(refimpl::normalize(h4_unique_priority_fee(l, cfg)) ==
          refimpl::ref_h4(l, cfg.fee_uniqueness_threshold));

    LinkageReport report = run_all_heuristics(l, cfg);
    CHECK(refimpl::normalize(report.clusters) ==
          refimpl::ref_combined_clusters(l, cfg.fee_uniqueness_threshold));

    std::set<std::string> linked;
    for (const auto& [st, id] : refimpl::ref_h1(l)) linked.insert(st);
    for (const auto& [st, id] : refimpl::ref_h2(l)) linked.insert(st);
    CHECK(report.total_linked == linked.size());

    if (!report.h1.empty()) ++nonempty_h1;
    if (report.clusters.member_count() > 0) ++nonempty_clusters;
  }
  // The generator must actually exercise the heuristics.
  CHECK(nonempty_h1 > 25);
  CHECK(nonempty_clusters > 25);
}

TEST_CASE("raising the fee threshold never drops a cluster member") {
  for (uint64_t trial = 0; trial < 10; ++trial) {
    Rng rng(600 + trial);
    Ledger l = random_ledger(rng);
    std::set<std::string> previous;
    for (uint32_t threshold : {2u, 4u, 8u}) {
      HeuristicConfig cfg;
      cfg.fee_uniqueness_threshold = threshold;
      ClusterSet cs = h4_unique_priority_fee(l, cfg);
      std::set<std::string> members;
      for (const auto& part : cs.partitions()) {
        for (const ChainAddress& m : part) members.insert(m.to_string());
      }
      for (const std::string& m : previous) CHECK(members.count(m) == 1);
      previous = std::move(members);
    }
  }
}

TEST_CASE("findings on simulated traffic attribute to the true owner") {
  SimConfig config;
  config.entities = 30;
  config.payments = 300;
  config.seed = 71;
  config.group = "production";
  config.token_fraction = 0.25;
  config.profiles.push_back({profile_preset("default"), 2.0});
  config.profiles.push_back({profile_preset("registrant_reuser"), 1.0});
  config.profiles.push_back({profile_preset("self_tester"), 1.0});
  config.profiles.push_back({profile_preset("manual_fee"), 1.0});
  config.profiles.push_back({profile_preset("collector"), 1.0});

  SimOutput out = simulate(config);
  const GroundTruth& gt = out.ground_truth;
  LinkageReport report = run_all_heuristics(out.ledger);

  auto owner_of = [&](const ChainAddress& a) -> uint32_t {
    if (auto it = gt.stealth_entity.find(a); it != gt.stealth_entity.end()) return it->second;
    return gt.address_entity.at(a);
  };

  CHECK(!report.h1.empty());
  CHECK(!report.h2.empty());

  std::set<ChainAddress> h1_stealths;
  for (const LinkFinding& f : report.h1) {
    CHECK(owner_of(f.stealth_address) == owner_of(f.attributed_identity));
    CHECK(f.identity_kind == IdentityKind::Registrant);
    CHECK(out.ledger.registrations_by_registrant.count(f.attributed_identity) == 1);
    CHECK(h1_stealths.insert(f.stealth_address).second);
  }
  std::set<ChainAddress> h2_stealths;
  for (const LinkFinding& f : report.h2) {
    CHECK(owner_of(f.stealth_address) == owner_of(f.attributed_identity));
    CHECK(f.identity_kind == IdentityKind::Sender);
    CHECK(h2_stealths.insert(f.stealth_address).second);
  }

  size_t multi_member = 0;
  for (const auto& part : report.clusters.partitions()) {
    if (part.size() < 2) continue;
    ++multi_member;
    uint32_t owner = owner_of(part[0]);
    for (const ChainAddress& m : part) CHECK(owner_of(m) == owner);
  }
  CHECK(multi_member > 0);
}

TEST_CASE("repeated rare fees cluster one entity's stealth addresses") {
  // Only manual fee entities, so every fee value is exclusive to one entity
  // and clusters must be pure. Mixing in auto entities would let a shared
  // round fee value slip under the threshold by chance.
  SimConfig config;
  config.entities = 40;
  config.payments = 120;
  config.seed = 8;
  config.group = "production";
  config.token_fraction = 0.0;
  config.profiles.push_back({profile_preset("manual_fee"), 1.0});

  SimOutput out = simulate(config);
  ClusterSet clusters = h4_unique_priority_fee(out.ledger);

  size_t multi_member = 0;
  for (const auto& part : clusters.partitions()) {
    if (part.size() < 2) continue;
    ++multi_member;
    uint32_t owner = out.ground_truth.stealth_entity.at(part[0]);
    for (const ChainAddress& m : part) {
      CHECK(out.ground_truth.stealth_entity.at(m) == owner);
    }
  }
  CHECK(multi_member > 0);
}

TEST_CASE("registrant linking recall tracks the reuse probability") {
  BehaviorProfile p = profile_preset("collector");
  p.name = "half_reuse";
  p.p_withdraw_to_registrant = 0.5;

  SimConfig config;
  config.entities = 8;
  config.payments = 1200;
  config.seed = 19;
  config.group = "production";
  config.token_fraction = 0.0;
  config.profiles.push_back({p, 1.0});

  SimOutput out = simulate(config);
  auto findings = h1_registrant_reuse(out.ledger);
  const double n = static_cast<double>(config.payments);
  const double recall = static_cast<double>(findings.size()) / n;
  const double three_se = 3.0 * std::sqrt(0.25 / n);
  CHECK(recall > 0.5 - three_se);
  CHECK(recall < 0.5 + three_se);
}

}

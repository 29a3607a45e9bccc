#include <doctest.h>
#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <set>

#include "fixture_ledger.hpp"
#include "umbra/group.hpp"
#include "umbra/heuristics.hpp"
#include "umbra/metrics.hpp"
#include "umbra/rng.hpp"
#include "umbra/simulate.hpp"

using namespace umbra;
using fixture::A;
using fixture::LedgerBuilder;

TEST_SUITE("metrics") {

TEST_CASE("entropy matches hand-computed Shannon values") {
  // Eight unlinked payments: full log2(8) bits of uncertainty remain.
  EntropyPair e = entropy_from_counts({}, 8);
  CHECK(e.naive_bits == doctest::Approx(3.0).epsilon(1e-9));
  CHECK(e.clustered_bits == doctest::Approx(3.0).epsilon(1e-9));
  CHECK(e.clustered_bits_uniform == doctest::Approx(3.0).epsilon(1e-9));

  // Explicit singletons are the same as implied ones.
  EntropyPair e2 = entropy_from_counts({1, 1, 1, 1, 1, 1, 1, 1}, 8);
  CHECK(e2.clustered_bits == doctest::Approx(3.0).epsilon(1e-9));

  // Everything linked into one cluster: no uncertainty left.
  EntropyPair full = entropy_from_counts({4}, 4);
  CHECK(full.naive_bits == doctest::Approx(2.0).epsilon(1e-9));
  CHECK(full.clustered_bits == doctest::Approx(0.0).epsilon(1e-9));
  CHECK(full.clustered_bits_uniform == doctest::Approx(0.0).epsilon(1e-9));

  // Sizes {2,1,1} over n=4: -(1/2)log2(1/2) - 2*(1/4)log2(1/4) = 1.5 bits.
  EntropyPair mixed = entropy_from_counts({2, 1, 1}, 4);
  CHECK(mixed.naive_bits == doctest::Approx(2.0).epsilon(1e-9));
  CHECK(mixed.clustered_bits == doctest::Approx(1.5).epsilon(1e-9));
  CHECK(mixed.clustered_bits_uniform == doctest::Approx(1.584962500721156).epsilon(1e-9));

  // A partial cover implies singletons for the remainder: {2} over n=4 is
  // the same distribution as {2,1,1}.
  EntropyPair partial = entropy_from_counts({2}, 4);
  CHECK(partial.clustered_bits == doctest::Approx(1.5).epsilon(1e-9));
  CHECK(partial.clustered_bits_uniform == doctest::Approx(1.584962500721156).epsilon(1e-9));
}

TEST_CASE("entropy rejects impossible inputs") {
  CHECK_THROWS_AS(entropy_from_counts({}, 0), std::invalid_argument);
  CHECK_THROWS_AS(entropy_from_counts({1, 0}, 4), std::invalid_argument);
  CHECK_THROWS_AS(entropy_from_counts({3, 2}, 4), std::invalid_argument);
}

TEST_CASE("clustered entropy never exceeds naive, equal only for singletons") {
  Rng rng(404);
  for (int trial = 0; trial < 200; ++trial) {
    size_t n = 1 + rng.below(40);
    std::vector<size_t> sizes;
    size_t left = n;
    while (left > 0 && rng.chance(0.8)) {
      size_t c = 1 + rng.below(left);
      sizes.push_back(c);
      left -= c;
    }
    EntropyPair e = entropy_from_counts(sizes, n);
    CHECK(e.clustered_bits <= e.naive_bits + 1e-12);
    bool all_singletons =
        std::all_of(sizes.begin(), sizes.end(), [](size_t c) { return c == 1; });
    if (all_singletons) {
      CHECK(e.clustered_bits == doctest::Approx(e.naive_bits).epsilon(1e-12));
    } else {
      CHECK(e.clustered_bits < e.naive_bits - 1e-12);
    }
  }
}

TEST_CASE("merging two clusters strictly lowers clustered entropy") {
  Rng rng(405);
  for (int trial = 0; trial < 100; ++trial) {
    size_t n = 4 + rng.below(60);
    std::vector<size_t> sizes;
    size_t left = n;
    while (sizes.size() < 2 || (left > 0 && rng.chance(0.7))) {
      size_t c = 1 + rng.below(std::max<size_t>(1, left / 2));
      if (c > left) break;
      sizes.push_back(c);
      left -= c;
    }
    if (sizes.size() < 2) continue;
    double before = entropy_from_counts(sizes, n).clustered_bits;

    std::vector<size_t> merged = sizes;
    merged[0] += merged[1];
    merged.erase(merged.begin() + 1);
    double after = entropy_from_counts(merged, n).clustered_bits;
    CHECK(after < before - 1e-12);
  }
}

TEST_CASE("recipient_entropy weighs partitions and implied singletons") {
  ClusterSet clusters;
  clusters.merge(A(1), A(2), HeuristicId::H3);
  EntropyPair e = recipient_entropy(clusters, 4);
  CHECK(e.clustered_bits == doctest::Approx(1.5).epsilon(1e-9));
  CHECK_THROWS_AS(recipient_entropy(clusters, 0), std::invalid_argument);
  CHECK_THROWS_AS(recipient_entropy(clusters, 1), std::invalid_argument);
}

TEST_CASE("percentage arithmetic reproduces the published linkage rates") {
  struct Row {
    const char* chain;
    size_t h1, h2, linked, withdrawn;
    double pct_linked, pct_h1;
  };
  const Row rows[] = {
      {"mainnet", 4671, 253, 4696, 9680, 48.5, 48.25},
      {"polygon", 15075, 670, 15084, 58454, 25.8, 25.79},
      {"arbitrum", 12488, 356, 12513, 19033, 65.7, 65.61},
      {"optimism", 8391, 135, 8403, 15963, 52.6, 52.57},
  };
  for (const Row& row : rows) {
    CAPTURE(row.chain);
    AnonymityReport r =
        anonymity_from_counts(row.chain, row.h1, row.h2, row.linked, row.withdrawn);
    CHECK(std::abs(r.pct_linked - row.pct_linked) < 0.05);
    CHECK(std::abs(r.pct_h1 - row.pct_h1) < 0.05);
    CHECK(r.total_linked <= r.count_h1 + r.count_h2);
  }

  AnonymityReport none = anonymity_from_counts("simnet", 0, 0, 0, 100);
  CHECK(none.pct_linked == 0.0);
  CHECK(none.pct_h1 == 0.0);

  CHECK_THROWS_AS(anonymity_from_counts("simnet", 3, 2, 6, 100), std::invalid_argument);
}

namespace {

// One ledger exercising every heuristic at once:
//   stealth 101: fully withdrawn to registrant A(1)        -> h1 finding
//   stealth 102: self-test, withdrawn back to sender A(11) -> h2 finding
//   stealth 103/104: both collected at A(20)               -> h3 cluster
//   stealth 105/106: shared rare fee 777                   -> h4 cluster
//   stealth 107: partial withdrawal, linked by nothing
Ledger analysis_fixture() {
  LedgerBuilder b;
  b.reg(1);
  b.send(10, 101, 500);
  b.withdraw(101, 1, 500, 0, 11);
  b.send(11, 102, 600);
  b.withdraw(102, 11, 600, 0, 12);
  b.send(12, 103, 700);
  b.send(12, 104, 800);
  b.withdraw(103, 20, 700, 0, 2);
  b.withdraw(104, 20, 800, 0, 3);
  b.send(13, 105, 900);
  b.send(13, 106, 950);
  b.withdraw(105, 21, 900, 0, 777);
  b.withdraw(106, 22, 950, 0, 777);
  b.send(14, 107, 1000);
  b.withdraw(107, 30, 400, 0, 5);
  return b.done();
}

}  // namespace

TEST_CASE("linkage_stats summarizes a full analysis run") {
  Ledger l = analysis_fixture();
  LinkageReport report = run_all_heuristics(l);
  AnonymityReport r = linkage_stats(report, l);

  CHECK(r.chain == "fixture");
  CHECK(r.count_h1 == 1);
  CHECK(r.count_h2 == 1);
  CHECK(r.total_linked == 2);
  CHECK(r.total_withdrawn == 7);
  CHECK(r.pct_linked == doctest::Approx(28.57142857142857).epsilon(1e-9));
  CHECK(r.pct_h1 == doctest::Approx(14.285714285714285).epsilon(1e-9));

  // Partitions by withdrawn members: {103,104}, {105,106}, {101}, {102},
  // plus 107 as an implied singleton.
  CHECK(r.naive_entropy_bits == doctest::Approx(2.807354922057604).epsilon(1e-9));
  CHECK(r.clustered_entropy_bits == doctest::Approx(2.2359263506290326).epsilon(1e-9));
  CHECK(r.clustered_entropy_bits_uniform == doctest::Approx(2.321928094887362).epsilon(1e-9));

  // The same report does not describe a ledger missing those addresses.
  LedgerBuilder other;
  other.reg(1);
  other.send(10, 108, 500);
  other.withdraw(108, 1, 500);
  Ledger unrelated = other.done();
  CHECK_THROWS_AS(linkage_stats(report, unrelated), std::invalid_argument);
}

TEST_CASE("anonymity report JSON carries every field") {
  Ledger l = analysis_fixture();
  AnonymityReport r = linkage_stats(run_all_heuristics(l), l);
  std::string text = anonymity_report_to_json_text(r);
  CHECK(text == anonymity_report_to_json_text(r));

  auto parsed = nlohmann::json::parse(text);
  CHECK(parsed["chain"] == "fixture");
  CHECK(parsed["count_h1"] == 1);
  CHECK(parsed["count_h2"] == 1);
  CHECK(parsed["total_linked"] == 2);
  CHECK(parsed["total_withdrawn"] == 7);
  CHECK(parsed["pct_linked"].get<double>() == doctest::Approx(28.5714285714));
  CHECK(parsed["naive_entropy_bits"].get<double>() == doctest::Approx(2.8073549221));
  CHECK(parsed["clustered_entropy_bits"].get<double>() == doctest::Approx(2.2359263506));
  CHECK(parsed["clustered_entropy_bits_uniform"].get<double>() == doctest::Approx(2.3219280949));
}

TEST_CASE("withdrawer distribution histograms recipients") {
  LedgerBuilder b;
  b.send(1, 101, 10);
  b.send(1, 102, 10);
  b.send(1, 103, 10);
  b.send(1, 104, 10);
  b.send(1, 105, 10);
  b.withdraw(101, 20, 10);
  b.withdraw(102, 20, 10);
  b.withdraw(103, 21, 10);
  b.withdraw(104, 21, 10);
  b.withdraw(105, 21, 10);
  Ledger l = b.done();

  WithdrawerDistribution dist = withdrawer_distribution(l);
  CHECK(dist.histogram == std::map<uint64_t, uint64_t>{{2, 1}, {3, 1}});
  CHECK(dist.max_withdrawals == 3);
  CHECK(dist.busiest == A(21));

  uint64_t total = 0;
  for (const auto& [k, count] : dist.histogram) total += k * count;
  CHECK(total == l.withdrawals.size());
}

TEST_CASE("all-distinct recipients land in the k=1 bucket") {
  LedgerBuilder b;
  for (uint64_t i = 0; i < 6; ++i) {
    b.send(1, 100 + i, 10);
    b.withdraw(100 + i, 200 + i, 10);
  }
  WithdrawerDistribution dist = withdrawer_distribution(b.done());
  CHECK(dist.histogram == std::map<uint64_t, uint64_t>{{1, 6}});
  CHECK(dist.max_withdrawals == 1);
}

TEST_CASE("a heavy collector dominates the distribution") {
  LedgerBuilder b;
  for (uint64_t i = 0; i < 481; ++i) {
    b.send(1, 1000 + i, 10);
    b.withdraw(1000 + i, 7, 10);
  }
  b.send(1, 2000, 10);
  b.send(1, 2001, 10);
  b.withdraw(2000, 8, 10);
  b.withdraw(2001, 8, 10);
  WithdrawerDistribution dist = withdrawer_distribution(b.done());
  CHECK(dist.histogram.at(481) == 1);
  CHECK(dist.max_withdrawals == 481);
  CHECK(dist.busiest == A(7));
}

TEST_CASE("busiest ties break toward the smallest address") {
  LedgerBuilder b;
  b.send(1, 101, 10);
  b.send(1, 102, 10);
  b.send(1, 103, 10);
  b.send(1, 104, 10);
  b.withdraw(101, 9, 10);
  b.withdraw(102, 9, 10);
  b.withdraw(103, 5, 10);
  b.withdraw(104, 5, 10);
  WithdrawerDistribution dist = withdrawer_distribution(b.done());
  CHECK(dist.max_withdrawals == 2);
  CHECK(dist.busiest == A(5));
}

TEST_CASE("withdrawer distribution CSV is plottable two-column data") {
  LedgerBuilder b;
  b.send(1, 101, 10);
  b.send(1, 102, 10);
  b.send(1, 103, 10);
  b.withdraw(101, 20, 10);
  b.withdraw(102, 20, 10);
  b.withdraw(103, 21, 10);
  WithdrawerDistribution dist = withdrawer_distribution(b.done());
  CHECK(withdrawer_distribution_to_csv(dist) ==
        "withdrawals_per_address,address_count\n1,1\n2,1\n");
}

TEST_CASE("heatmap buckets UTC day of week and hour") {
  // 1672531200 = Sunday 2023-01-01 00:00 UTC
  // 1672639320 = Monday 2023-01-02 06:02 UTC
  // 1672873200 = Wednesday 2023-01-04 23:00 UTC
  LedgerBuilder b;
  b.reg(60, 1672531200 / 12);
  b.send(61, 90, 5, true, 1672639320 / 12);
  b.send(1, 101, 10);
  b.send(1, 102, 10);
  b.send(1, 103, 10);
  b.withdraw(101, 50, 10, 0, 1, true, false, 1672531200 / 12);
  b.withdraw(102, 50, 10, 0, 2, true, false, 1672639320 / 12);
  b.withdraw(103, 50, 10, 0, 3, true, false, 1672873200 / 12);
  Ledger l = b.done();

  ActivityHeatmap recipient = activity_heatmap(l, A(50));
  CHECK(recipient.address_seen);
  CHECK(recipient.total == 3);
  CHECK(recipient.counts[0][0] == 1);
  CHECK(recipient.counts[1][6] == 1);
  CHECK(recipient.counts[3][23] == 1);
  uint64_t sum = 0;
  for (const auto& day : recipient.counts)
    for (uint64_t c : day) sum += c;
  CHECK(sum == recipient.total);

  ActivityHeatmap registrant = activity_heatmap(l, A(60));
  CHECK(registrant.total == 1);
  CHECK(registrant.counts[0][0] == 1);

  ActivityHeatmap sender = activity_heatmap(l, A(61));
  CHECK(sender.total == 1);
  CHECK(sender.counts[1][6] == 1);
}

TEST_CASE("heatmap flags addresses the ledger never saw") {
  LedgerBuilder b;
  b.send(1, 101, 10);
  Ledger l = b.done();
  ActivityHeatmap map = activity_heatmap(l, A(999));
  CHECK_FALSE(map.address_seen);
  CHECK(map.total == 0);
  for (const auto& day : map.counts)
    for (uint64_t c : day) CHECK(c == 0);
}

TEST_CASE("bursty senders concentrate their activity in a few cells") {
  const Group& g = find_group("toy101");
  SimEngine engine(g, 31, ChainId{"simnet"});
  BehaviorProfile bursty = profile_preset("default");
  bursty.burstiness = Burstiness{0.25, 50.0};
  engine.add_entity(bursty);
  for (int i = 0; i < 3; ++i) engine.add_entity(profile_preset("default"));
  for (int i = 0; i < 40; ++i) engine.send_payment(0, 1 + i % 3, false);
  ChainAddress sender = engine.entity_sender_address(0);
  SimOutput out = engine.finalize();

  ActivityHeatmap map = activity_heatmap(out.ledger, sender);
  CHECK(map.total == 40);
  size_t nonzero = 0;
  for (const auto& day : map.counts)
    for (uint64_t c : day)
      if (c > 0) ++nonzero;
  // A six-hour window straddles at most seven hour-of-week buckets.
  CHECK(nonzero <= 7);
}

TEST_CASE("heatmap JSON exposes the full matrix") {
  LedgerBuilder b;
  b.send(1, 101, 10);
  b.withdraw(101, 50, 10, 0, 1, true, false, 1672639320 / 12);
  Ledger l = b.done();
  ActivityHeatmap map = activity_heatmap(l, A(50));
  std::string text = activity_heatmap_to_json_text(map);
  CHECK(text == activity_heatmap_to_json_text(map));

  auto parsed = nlohmann::json::parse(text);
  CHECK(parsed["address"] == A(50).to_string());
  CHECK(parsed["address_seen"] == true);
  CHECK(parsed["total"] == 1);
  CHECK(parsed["counts_by_day_and_hour"].size() == 7);
  CHECK(parsed["counts_by_day_and_hour"][1].size() == 24);
  CHECK(parsed["counts_by_day_and_hour"][1][6] == 1);
}

TEST_CASE("identity heuristics attribute perfectly on simulated data") {
  SimConfig config;
  config.entities = 30;
  config.payments = 300;
  config.seed = 88;
  config.token_fraction = 0.25;
  config.profiles = {
      {profile_preset("default"), 2.0},      {profile_preset("registrant_reuser"), 1.0},
      {profile_preset("self_tester"), 1.0},  {profile_preset("manual_fee"), 1.0},
      {profile_preset("collector"), 1.0},
  };
  SimOutput out = simulate(config);
  LinkageReport report = run_all_heuristics(out.ledger);
  PrecisionRecallReport pr = precision_recall(report, out.ground_truth, out.ledger);

  REQUIRE(pr.h1.attributions > 0);
  CHECK(pr.h1.correct == pr.h1.attributions);
  CHECK(*pr.h1.precision == 1.0);
  REQUIRE(pr.h1.recall.has_value());
  CHECK(*pr.h1.recall > 0.1);
  CHECK(*pr.h1.recall <= 1.0);
  CHECK(pr.h1.correct <= pr.h1.eligible);

  REQUIRE(pr.h2.attributions > 0);
  CHECK(*pr.h2.precision == 1.0);
  REQUIRE(pr.h2.recall.has_value());
  CHECK(*pr.h2.recall > 0.1);

  REQUIRE(pr.h3.attributions > 0);
  CHECK(*pr.h3.precision == 1.0);
  REQUIRE(pr.h3.recall.has_value());
  CHECK(*pr.h3.recall > 0.0);
  CHECK(*pr.h3.recall <= 1.0);
}

TEST_CASE("fee clustering scores cleanly when fees are entity-exclusive") {
  SimConfig config;
  config.entities = 40;
  config.payments = 120;
  config.seed = 89;
  config.token_fraction = 0.0;
  config.profiles = {{profile_preset("manual_fee"), 1.0}};
  SimOutput out = simulate(config);
  LinkageReport report = run_all_heuristics(out.ledger);
  PrecisionRecallReport pr = precision_recall(report, out.ground_truth, out.ledger);

  REQUIRE(pr.h4.attributions > 0);
  CHECK(pr.h4.correct == pr.h4.attributions);
  CHECK(*pr.h4.precision == 1.0);
  REQUIRE(pr.h4.recall.has_value());
  CHECK(*pr.h4.recall > 0.3);
  CHECK(*pr.h4.recall <= 1.0);
}

TEST_CASE("countermeasure population leaves recall undefined") {
  SimConfig config;
  config.entities = 8;
  config.payments = 40;
  config.seed = 90;
  config.profiles = {{profile_preset("countermeasure"), 1.0}};
  SimOutput out = simulate(config);
  LinkageReport report = run_all_heuristics(out.ledger);
  PrecisionRecallReport pr = precision_recall(report, out.ground_truth, out.ledger);

  CHECK(pr.h1.attributions == 0);
  CHECK_FALSE(pr.h1.precision.has_value());
  CHECK(pr.h2.attributions == 0);
  CHECK(pr.h1.eligible == 0);
  CHECK_FALSE(pr.h1.recall.has_value());
  CHECK_FALSE(pr.h2.recall.has_value());
  CHECK_FALSE(pr.h3.recall.has_value());
  CHECK_FALSE(pr.h4.recall.has_value());
}

TEST_CASE("one wrong attribution out of four scores 0.75") {
  // Stealth 104 belongs to entity 2 but was withdrawn to entity 1's
  // registrant, so the heuristic's attribution of 104 is wrong.
  LedgerBuilder b;
  b.reg(1);
  b.reg(2);
  for (uint64_t st : {101, 102, 103, 104}) b.send(10, st, 50);
  b.withdraw(101, 1, 50);
  b.withdraw(102, 1, 50);
  b.withdraw(103, 2, 50);
  b.withdraw(104, 2, 50);
  Ledger l = b.done();

  GroundTruth gt;
  gt.num_entities = 3;
  gt.stealth_entity[A(101)] = 0;
  gt.stealth_entity[A(102)] = 0;
  gt.stealth_entity[A(103)] = 1;
  gt.stealth_entity[A(104)] = 2;
  gt.address_entity[A(1)] = 0;
  gt.address_entity[A(2)] = 1;
  gt.flags.resize(3);
  for (auto& f : gt.flags) f.registrant_reuse = true;

  LinkageReport report = run_all_heuristics(l);
  REQUIRE(report.h1.size() == 4);
  PrecisionRecallReport pr = precision_recall(report, gt, l);
  CHECK(pr.h1.attributions == 4);
  CHECK(pr.h1.correct == 3);
  CHECK(*pr.h1.precision == 0.75);

  std::string text = precision_recall_to_json_text(pr);
  auto parsed = nlohmann::json::parse(text);
  CHECK(parsed["h1"]["precision"].get<double>() == 0.75);
  CHECK(parsed["h2"]["precision"].is_null());
  CHECK(text == precision_recall_to_json_text(pr));
}

TEST_CASE("scoring requires ground truth") {
  Ledger l = analysis_fixture();
  LinkageReport report = run_all_heuristics(l);
  GroundTruth empty;
  CHECK_THROWS_AS(precision_recall(report, empty, l), std::invalid_argument);
}

TEST_CASE("cumulative usage CSV walks records in block order") {
  LedgerBuilder b;
  b.reg(1, 5);
  b.reg(2, 9);
  b.send(10, 101, 50, true, 100);
  b.send(10, 102, 50, true, 110);
  b.withdraw(101, 1, 50, 0, 1, true, false, 200);
  Ledger l = b.done();

  CHECK(cumulative_usage_csv(l, RecordKind::Registrations) ==
        "timestamp,cumulative_registrations\n60,1\n108,2\n");
  CHECK(cumulative_usage_csv(l, RecordKind::Sends) ==
        "timestamp,cumulative_sends\n1200,1\n1320,2\n");
  CHECK(cumulative_usage_csv(l, RecordKind::Withdrawals) ==
        "timestamp,cumulative_withdrawals\n2400,1\n");
}

}  // TEST_SUITE

#include "umbra/cli.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "umbra/bytes.hpp"
#include "umbra/explorer.hpp"
#include "umbra/game.hpp"
#include "umbra/group.hpp"
#include "umbra/hash.hpp"
#include "umbra/heuristics.hpp"
#include "umbra/ledger.hpp"
#include "umbra/metrics.hpp"
#include "umbra/simulate.hpp"
#include "umbra/version.hpp"

namespace umbra::cli {
namespace {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

std::string config_hash(const std::string& text) {
  const Digest digest = sha256(
      std::span<const uint8_t>(reinterpret_cast<const uint8_t*>(text.data()), text.size()));
  return to_hex(digest).substr(0, 16);
}

ordered_json make_manifest(const std::string& command, uint64_t seed, const std::string& chain,
                           const std::string& effective_config) {
  return ordered_json{{"tool", kToolName},
                      {"version", kToolVersion},
                      {"command", command},
                      {"seed", seed},
                      {"chain", chain},
                      {"config_hash", config_hash(effective_config)}};
}

void write_text_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open for writing: " + path.string());
  out << text;
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

/// Re-emits a JSON object artifact with the manifest as its first key.
std::string with_manifest(const std::string& json_text, const ordered_json& manifest) {
  ordered_json payload = ordered_json::parse(json_text);
  ordered_json wrapped;
  wrapped["manifest"] = manifest;
  for (auto& [key, value] : payload.items()) wrapped[key] = std::move(value);
  return wrapped.dump(2) + "\n";
}

std::string csv_with_manifest(const std::string& csv, const ordered_json& manifest) {
  return "# " + manifest.dump() + "\n" + csv;
}

/// NDJSON ledger with a leading kind=manifest metadata line; the loader
/// skips that line.
void write_ledger_artifact(const fs::path& path, const Ledger& ledger, const Group& g,
                           const ordered_json& manifest) {
  ordered_json meta;
  meta["kind"] = "manifest";
  for (const auto& [key, value] : manifest.items()) meta[key] = value;
  std::ostringstream body;
  body << meta.dump() << "\n";
  save_ledger(body, ledger, g);
  write_text_file(path, body.str());
}

void write_manifest_file(const fs::path& dir, const ordered_json& manifest) {
  write_text_file(dir / "manifest.json", manifest.dump(2) + "\n");
}

nlohmann::json load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file: " + path);
  std::stringstream buffer;
  buffer << in.rdbuf();
  nlohmann::json parsed = nlohmann::json::parse(buffer.str(), nullptr, false);
  if (parsed.is_discarded() || !parsed.is_object()) {
    throw std::runtime_error("config file is not a JSON object: " + path);
  }
  return parsed;
}

nlohmann::json config_section(const nlohmann::json& config, const char* name) {
  auto it = config.find(name);
  if (it == config.end()) return nlohmann::json::object();
  if (!it->is_object()) {
    throw std::runtime_error(std::string("config section \"") + name + "\" must be an object");
  }
  return *it;
}

template <typename T>
void fill_from_section(const nlohmann::json& section, const char* key, const CLI::Option* flag,
                       T& target) {
  if (flag->count() > 0) return;
  if (auto it = section.find(key); it != section.end()) target = it->get<T>();
}

struct SimulateOptions {
  SimConfig config;
  std::string out_dir;
};

int cmd_simulate(const SimulateOptions& o, std::ostream& out) {
  const std::string effective = sim_config_to_json_text(o.config);
  const ordered_json manifest =
      make_manifest("simulate", o.config.seed, o.config.chain.name, effective);

  SimOutput result = simulate(o.config);
  const Group& g = find_group(o.config.group);

  const fs::path dir(o.out_dir);
  fs::create_directories(dir);
  write_ledger_artifact(dir / "ledger.ndjson", result.ledger, g, manifest);

  std::ostringstream gt;
  save_ground_truth(gt, result.ground_truth);
  write_text_file(dir / "ground_truth.json", with_manifest(gt.str(), manifest));
  write_manifest_file(dir, manifest);

  out << "simulated " << result.ledger.sends.size() << " payments among "
      << result.ground_truth.num_entities << " entities (" << result.ledger.record_count()
      << " records, seed " << o.config.seed << ")\n";
  out << "wrote " << (dir / "ledger.ndjson").string() << "\n";
  out << "wrote " << (dir / "ground_truth.json").string() << "\n";
  out << "wrote " << (dir / "manifest.json").string() << "\n";
  return 0;
}

struct IngestOptions {
  std::optional<std::string> export_path;
  std::optional<std::string> endpoint;
  ExplorerConfig explorer;
  std::string chain = "mainnet";
  std::string group = "production";
  uint64_t seed = 0;
  std::string out_dir;
};

int cmd_ingest(const IngestOptions& o, std::ostream& out, std::ostream& err) {
  const Group& g = find_group(o.group);

  ordered_json effective;
  effective["mode"] = o.export_path ? "export" : "endpoint";
  if (o.export_path) effective["export"] = *o.export_path;
  if (o.endpoint) {
    effective["endpoint"] = *o.endpoint;
    effective["api_path"] = o.explorer.path;
    effective["page_size"] = o.explorer.page_size;
    effective["max_retries"] = o.explorer.max_retries;
  }
  effective["chain"] = o.chain;
  effective["group"] = o.group;
  const ordered_json manifest = make_manifest("ingest", o.seed, o.chain, effective.dump(2));

  LoadResult result;
  size_t pages = 0;
  if (o.export_path) {
    result = ingest_export_file(*o.export_path, g, ChainId{o.chain});
  } else {
    ExplorerConfig explorer = o.explorer;
    explorer.base_url = *o.endpoint;
    FetchResult fetched = fetch_from_explorer(explorer);
    pages = fetched.pages_fetched;
    result = ingest_records(fetched.records, g, ChainId{o.chain});
  }

  for (const LineDiagnostic& d : result.malformed) {
    err << "record " << d.line << ": " << d.message << "\n";
  }
  for (const std::string& w : result.warnings) err << "warning: " << w << "\n";

  const fs::path dir(o.out_dir);
  fs::create_directories(dir);
  write_ledger_artifact(dir / "ledger.ndjson", result.ledger, g, manifest);
  write_manifest_file(dir, manifest);

  out << "ingested " << result.ledger.record_count() << " records ("
      << result.malformed.size() << " malformed, " << result.warnings.size() << " warnings";
  if (o.endpoint) out << ", " << pages << " pages";
  out << ")\n";
  out << "wrote " << (dir / "ledger.ndjson").string() << "\n";
  out << "wrote " << (dir / "manifest.json").string() << "\n";
  return 0;
}

struct AnalyzeOptions {
  std::string ledger_path;
  std::optional<std::string> ground_truth_path;
  std::string chain = "simnet";
  std::string group = "production";
  HeuristicConfig heuristics;
  std::vector<std::string> heatmap_addresses;
  uint64_t seed = 0;
  std::string out_dir;
};

int cmd_analyze(const AnalyzeOptions& o, std::ostream& out, std::ostream& err) {
  o.heuristics.validate();
  const Group& g = find_group(o.group);

  ordered_json effective;
  effective["ledger"] = o.ledger_path;
  if (o.ground_truth_path) effective["ground_truth"] = *o.ground_truth_path;
  effective["chain"] = o.chain;
  effective["group"] = o.group;
  effective["fee_uniqueness_threshold"] = o.heuristics.fee_uniqueness_threshold;
  effective["heatmap_addresses"] = o.heatmap_addresses;
  const ordered_json manifest = make_manifest("analyze", o.seed, o.chain, effective.dump(2));

  LoadResult loaded = load_ledger_file(o.ledger_path, g, ChainId{o.chain});
  for (const LineDiagnostic& d : loaded.malformed) {
    err << o.ledger_path << ":" << d.line << ": " << d.message << "\n";
  }
  for (const std::string& w : loaded.warnings) err << "warning: " << w << "\n";

  LinkageReport report = run_all_heuristics(loaded.ledger, o.heuristics);
  AnonymityReport stats = linkage_stats(report, loaded.ledger);
  stats.chain = o.chain;

  const fs::path dir(o.out_dir);
  fs::create_directories(dir);
  write_text_file(dir / "findings.json",
                  with_manifest(linkage_report_to_json_text(report), manifest));
  write_text_file(dir / "report.json", with_manifest(anonymity_report_to_json_text(stats), manifest));
  write_text_file(
      dir / "withdrawer_distribution.csv",
      csv_with_manifest(withdrawer_distribution_to_csv(withdrawer_distribution(loaded.ledger)),
                        manifest));
  write_text_file(
      dir / "cumulative_registrations.csv",
      csv_with_manifest(cumulative_usage_csv(loaded.ledger, RecordKind::Registrations), manifest));
  write_text_file(dir / "cumulative_sends.csv",
                  csv_with_manifest(cumulative_usage_csv(loaded.ledger, RecordKind::Sends), manifest));
  write_text_file(
      dir / "cumulative_withdrawals.csv",
      csv_with_manifest(cumulative_usage_csv(loaded.ledger, RecordKind::Withdrawals), manifest));

  if (o.ground_truth_path) {
    GroundTruth gt = load_ground_truth_file(*o.ground_truth_path);
    PrecisionRecallReport scores = precision_recall(report, gt, loaded.ledger);
    write_text_file(dir / "precision_recall.json",
                    with_manifest(precision_recall_to_json_text(scores), manifest));
  }
  for (const std::string& text : o.heatmap_addresses) {
    std::optional<ChainAddress> address = ChainAddress::from_string(text);
    if (!address) throw std::runtime_error("not a chain address: " + text);
    ActivityHeatmap map = activity_heatmap(loaded.ledger, *address);
    write_text_file(dir / ("heatmap_" + address->to_string() + ".json"),
                    with_manifest(activity_heatmap_to_json_text(map), manifest));
  }
  write_manifest_file(dir, manifest);

  out << "analyzed " << loaded.ledger.record_count() << " records: " << stats.total_linked
      << " of " << stats.total_withdrawn << " withdrawn stealth payments linked ("
      << stats.pct_linked << "%), " << report.clusters.partitions().size() << " clusters\n";
  out << "wrote " << (dir / "report.json").string() << "\n";
  out << "wrote " << (dir / "findings.json").string() << "\n";
  if (o.ground_truth_path) out << "wrote " << (dir / "precision_recall.json").string() << "\n";
  return 0;
}

struct GameOptions {
  GameConfig config;
  std::string strategy = "random";
  std::string profile_name = "collector";
  std::string out_dir;
};

int cmd_game(const GameOptions& o, std::ostream& out, std::ostream& err) {
  AdversaryStrategy strategy;
  try {
    strategy = make_strategy(o.strategy);
  } catch (const std::invalid_argument& e) {
    err << "error: " << e.what() << "\navailable strategies:";
    for (const std::string& name : strategy_names()) err << " " << name;
    err << "\n";
    return 1;
  }

  ordered_json effective;
  effective["strategy"] = o.strategy;
  effective["trials"] = o.config.trials;
  effective["seed"] = o.config.seed;
  effective["profile"] = o.profile_name;
  effective["background_entities"] = o.config.background_entities;
  effective["background_payments"] = o.config.background_payments;
  effective["token_fraction"] = o.config.token_fraction;
  effective["group"] = o.config.group;
  const ordered_json manifest = make_manifest("game", o.config.seed, "simnet", effective.dump(2));

  GameResult result = run_ru_game(strategy, o.config);

  const fs::path dir(o.out_dir);
  fs::create_directories(dir);
  write_text_file(dir / "game_result.json",
                  with_manifest(game_result_to_json_text(result), manifest));
  write_manifest_file(dir, manifest);

  out << "strategy " << result.strategy << ": " << result.successes << "/" << result.trials
      << " correct, advantage " << result.advantage << "\n";
  out << "wrote " << (dir / "game_result.json").string() << "\n";
  return 0;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"stealth payment simulation, ingestion, and deanonymization toolkit"};
  app.name(kToolName);
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(kToolVersion));

  std::string config_path;
  app.add_option("--config", config_path,
                 "JSON config file with per-command sections; flags override it");

  auto* sim = app.add_subcommand("simulate",
                                 "generate a synthetic stealth payment ledger with ground truth");
  sim->fallthrough();
  uint32_t sim_entities = 0;
  uint32_t sim_payments = 0;
  uint32_t sim_horizon = 0;
  uint64_t sim_seed = 0;
  double sim_token_fraction = 0.0;
  std::string sim_chain;
  std::string sim_group;
  std::string sim_out;
  auto* sim_entities_opt = sim->add_option("--entities", sim_entities, "number of participants");
  auto* sim_payments_opt = sim->add_option("--payments", sim_payments, "number of stealth payments");
  auto* sim_seed_opt = sim->add_option("--seed", sim_seed, "rng seed");
  auto* sim_chain_opt = sim->add_option("--chain", sim_chain, "chain name stamped on the ledger");
  auto* sim_group_opt = sim->add_option("--group", sim_group, "curve backend: production or toy101");
  auto* sim_token_opt =
      sim->add_option("--token-fraction", sim_token_fraction, "share of payments in tokens");
  auto* sim_horizon_opt = sim->add_option("--horizon-days", sim_horizon, "simulated time span");
  sim->add_option("--out", sim_out, "output directory")->required();

  auto* ing = app.add_subcommand("ingest",
                                 "fetch or replay explorer records into a normalized ledger");
  ing->fallthrough();
  std::string ing_export;
  std::string ing_endpoint;
  std::string ing_api_path;
  std::string ing_api_key;
  std::string ing_chain;
  std::string ing_group;
  std::string ing_out;
  uint32_t ing_page_size = 0;
  uint32_t ing_max_retries = 0;
  uint64_t ing_seed = 0;
  auto* ing_export_opt =
      ing->add_option("--export", ing_export, "recorded export file, one raw record per line");
  auto* ing_endpoint_opt =
      ing->add_option("--endpoint", ing_endpoint, "explorer base URL, e.g. https://host:port");
  ing_export_opt->excludes(ing_endpoint_opt);
  auto* ing_api_path_opt = ing->add_option("--api-path", ing_api_path, "explorer API path");
  auto* ing_api_key_opt =
      ing->add_option("--api-key", ing_api_key, "API key (default: ETHERSCAN_API_KEY)");
  auto* ing_page_size_opt = ing->add_option("--page-size", ing_page_size, "records per page");
  auto* ing_max_retries_opt =
      ing->add_option("--max-retries", ing_max_retries, "retries per page after a failure");
  auto* ing_chain_opt = ing->add_option("--chain", ing_chain, "chain name stamped on the ledger");
  auto* ing_group_opt = ing->add_option("--group", ing_group, "curve backend: production or toy101");
  auto* ing_seed_opt = ing->add_option("--seed", ing_seed, "seed recorded in the manifest");
  ing->add_option("--out", ing_out, "output directory")->required();

  auto* ana = app.add_subcommand("analyze",
                                 "run the linkage heuristics and anonymity metrics over a ledger");
  ana->fallthrough();
  std::string ana_ledger;
  std::string ana_ground_truth;
  std::string ana_chain;
  std::string ana_group;
  std::string ana_out;
  uint32_t ana_fee_threshold = 0;
  uint64_t ana_seed = 0;
  std::vector<std::string> ana_heatmaps;
  auto* ana_ledger_opt =
      ana->add_option("--ledger", ana_ledger, "NDJSON ledger file")->required();
  auto* ana_gt_opt = ana->add_option("--ground-truth", ana_ground_truth,
                                     "simulator answer key; enables precision and recall");
  auto* ana_chain_opt = ana->add_option("--chain", ana_chain, "chain name for the report");
  auto* ana_group_opt = ana->add_option("--group", ana_group, "curve backend: production or toy101");
  auto* ana_fee_opt = ana->add_option("--fee-threshold", ana_fee_threshold,
                                      "max occurrences for a priority fee to count as identifying");
  auto* ana_heatmap_opt =
      ana->add_option("--heatmap", ana_heatmaps, "address to render an activity heatmap for");
  auto* ana_seed_opt = ana->add_option("--seed", ana_seed, "seed recorded in the manifest");
  ana->add_option("--out", ana_out, "output directory")->required();

  auto* game = app.add_subcommand("game", "run the recipient unlinkability game");
  game->fallthrough();
  std::string game_strategy;
  std::string game_profile;
  std::string game_group;
  std::string game_out;
  uint32_t game_trials = 0;
  uint32_t game_bg_entities = 0;
  uint32_t game_bg_payments = 0;
  uint64_t game_seed = 0;
  double game_token_fraction = 0.0;
  auto* game_strategy_opt = game->add_option("--strategy", game_strategy, "adversary strategy");
  auto* game_trials_opt = game->add_option("--trials", game_trials, "number of game trials");
  auto* game_seed_opt = game->add_option("--seed", game_seed, "rng seed");
  auto* game_profile_opt =
      game->add_option("--profile", game_profile, "behavior preset for the challenge recipients");
  auto* game_bg_entities_opt =
      game->add_option("--background-entities", game_bg_entities, "extra entities per trial");
  auto* game_bg_payments_opt =
      game->add_option("--background-payments", game_bg_payments, "cover payments per trial");
  auto* game_token_opt =
      game->add_option("--token-fraction", game_token_fraction, "share of cover payments in tokens");
  auto* game_group_opt =
      game->add_option("--group", game_group, "curve backend: production or toy101");
  game->add_option("--out", game_out, "output directory")->required();

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(std::move(reversed));
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err);
  }

  try {
    nlohmann::json config = nlohmann::json::object();
    if (!config_path.empty()) config = load_config_file(config_path);

    if (app.got_subcommand(sim)) {
      const nlohmann::json section = config_section(config, "simulate");
      SimulateOptions o;
      o.config = section.empty() ? SimConfig{} : sim_config_from_json_text(section.dump());
      if (sim_entities_opt->count() > 0) o.config.entities = sim_entities;
      if (sim_payments_opt->count() > 0) o.config.payments = sim_payments;
      if (sim_seed_opt->count() > 0) o.config.seed = sim_seed;
      if (sim_chain_opt->count() > 0) o.config.chain.name = sim_chain;
      if (sim_group_opt->count() > 0) o.config.group = sim_group;
      if (sim_token_opt->count() > 0) o.config.token_fraction = sim_token_fraction;
      if (sim_horizon_opt->count() > 0) o.config.horizon_days = sim_horizon;
      o.out_dir = sim_out;
      return cmd_simulate(o, out);
    }

    if (app.got_subcommand(ing)) {
      const nlohmann::json section = config_section(config, "ingest");
      IngestOptions o;
      fill_from_section(section, "export", ing_export_opt, ing_export);
      fill_from_section(section, "endpoint", ing_endpoint_opt, ing_endpoint);
      fill_from_section(section, "api_path", ing_api_path_opt, ing_api_path);
      fill_from_section(section, "api_key", ing_api_key_opt, ing_api_key);
      fill_from_section(section, "page_size", ing_page_size_opt, ing_page_size);
      fill_from_section(section, "max_retries", ing_max_retries_opt, ing_max_retries);
      fill_from_section(section, "chain", ing_chain_opt, o.chain);
      fill_from_section(section, "group", ing_group_opt, o.group);
      fill_from_section(section, "seed", ing_seed_opt, o.seed);
      if (!ing_export.empty()) o.export_path = ing_export;
      if (!ing_endpoint.empty()) o.endpoint = ing_endpoint;
      if (o.export_path && o.endpoint) {
        err << "error: --export and --endpoint are mutually exclusive\n";
        return 1;
      }
      if (!o.export_path && !o.endpoint) {
        err << "error: ingest needs --export or --endpoint\n";
        return 1;
      }
      if (!ing_api_path.empty()) o.explorer.path = ing_api_path;
      if (!ing_api_key.empty()) o.explorer.api_key = ing_api_key;
      if (ing_page_size_opt->count() > 0 || section.contains("page_size")) {
        o.explorer.page_size = ing_page_size;
      }
      if (ing_max_retries_opt->count() > 0 || section.contains("max_retries")) {
        o.explorer.max_retries = ing_max_retries;
      }
      if (ing_chain_opt->count() > 0) o.chain = ing_chain;
      if (ing_group_opt->count() > 0) o.group = ing_group;
      if (ing_seed_opt->count() > 0) o.seed = ing_seed;
      o.out_dir = ing_out;
      return cmd_ingest(o, out, err);
    }

    if (app.got_subcommand(ana)) {
      const nlohmann::json section = config_section(config, "analyze");
      AnalyzeOptions o;
      fill_from_section(section, "ledger", ana_ledger_opt, ana_ledger);
      fill_from_section(section, "ground_truth", ana_gt_opt, ana_ground_truth);
      fill_from_section(section, "chain", ana_chain_opt, o.chain);
      fill_from_section(section, "group", ana_group_opt, o.group);
      fill_from_section(section, "fee_threshold", ana_fee_opt, ana_fee_threshold);
      fill_from_section(section, "heatmap", ana_heatmap_opt, ana_heatmaps);
      fill_from_section(section, "seed", ana_seed_opt, o.seed);
      o.ledger_path = ana_ledger;
      if (!ana_ground_truth.empty()) o.ground_truth_path = ana_ground_truth;
      if (ana_chain_opt->count() > 0) o.chain = ana_chain;
      if (ana_group_opt->count() > 0) o.group = ana_group;
      if (ana_fee_opt->count() > 0 || section.contains("fee_threshold")) {
        o.heuristics.fee_uniqueness_threshold = ana_fee_threshold;
      }
      o.heatmap_addresses = ana_heatmaps;
      if (ana_seed_opt->count() > 0) o.seed = ana_seed;
      o.out_dir = ana_out;
      return cmd_analyze(o, out, err);
    }

    if (app.got_subcommand(game)) {
      const nlohmann::json section = config_section(config, "game");
      GameOptions o;
      fill_from_section(section, "strategy", game_strategy_opt, o.strategy);
      fill_from_section(section, "profile", game_profile_opt, o.profile_name);
      fill_from_section(section, "trials", game_trials_opt, o.config.trials);
      fill_from_section(section, "seed", game_seed_opt, o.config.seed);
      fill_from_section(section, "background_entities", game_bg_entities_opt,
                        o.config.background_entities);
      fill_from_section(section, "background_payments", game_bg_payments_opt,
                        o.config.background_payments);
      fill_from_section(section, "token_fraction", game_token_opt, o.config.token_fraction);
      fill_from_section(section, "group", game_group_opt, o.config.group);
      if (game_strategy_opt->count() > 0) o.strategy = game_strategy;
      if (game_profile_opt->count() > 0) o.profile_name = game_profile;
      if (game_trials_opt->count() > 0) o.config.trials = game_trials;
      if (game_seed_opt->count() > 0) o.config.seed = game_seed;
      if (game_bg_entities_opt->count() > 0) o.config.background_entities = game_bg_entities;
      if (game_bg_payments_opt->count() > 0) o.config.background_payments = game_bg_payments;
      if (game_token_opt->count() > 0) o.config.token_fraction = game_token_fraction;
      if (game_group_opt->count() > 0) o.config.group = game_group;
      o.config.recipient_profile = profile_preset(o.profile_name);
      o.out_dir = game_out;
      return cmd_game(o, out, err);
    }
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

}  // namespace umbra::cli

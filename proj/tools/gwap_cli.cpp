// gwap: simulate game sessions, replay contribution logs through the
// incremental engine, and compare its labels with ex-post aggregators.

#include <cctype>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "gwap/baselines.hpp"
#include "gwap/engine.hpp"
#include "gwap/io.hpp"
#include "gwap/metrics.hpp"
#include "gwap/simulator.hpp"

namespace fs = std::filesystem;
using namespace gwap;

namespace {

constexpr int kExitError = 1;
constexpr int kExitStarvation = 3;

struct EngineFlags {
  std::string config_path;
  std::optional<int> min_agreement;
  std::optional<double> threshold;
  std::optional<double> alpha;

  void attach(CLI::App* cmd) {
    cmd->add_option("--config", config_path, "Engine config file (key = value per line)");
    cmd->add_option("--min-agreement", min_agreement, "Required agreeing answers per task (p)");
    cmd->add_option("--threshold", threshold, "Completion threshold; defaults to (p - 0.5) * increment");
    cmd->add_option("--alpha", alpha, "Reliability decay per control error");
  }

  // Defaults, then the config file, then flags.
  EngineConfig resolve() const {
    EngineConfig config;
    std::set<std::string> from_file;
    if (!config_path.empty()) {
      std::ifstream in(config_path);
      if (!in) throw Error(ErrorCode::IoError, "cannot open config '" + config_path + "'");
      from_file = apply_config_text(in, config);
    }
    if (min_agreement) config.min_agreement = *min_agreement;
    if (alpha) config.alpha = *alpha;
    if (threshold) {
      config.threshold = *threshold;
    } else if (!from_file.count("threshold")) {
      config.threshold = (config.min_agreement - 0.5) * config.increment;
    }
    return config;
  }
};

LabelSet parse_label_flag(const std::string& value) {
  const bool numeric = !value.empty() && std::all_of(value.begin(), value.end(), [](unsigned char c) {
    return std::isdigit(c) != 0;
  });
  if (numeric) return LabelSet::numbered(std::stoul(value));
  std::vector<std::string> labels;
  std::stringstream ss(value);
  for (std::string item; std::getline(ss, item, ',');) {
    if (!item.empty()) labels.push_back(item);
  }
  return LabelSet(std::move(labels));
}

fs::path prepare_out_dir(const std::string& out) {
  fs::path dir(out);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) {
    throw Error(ErrorCode::IoError, "cannot create output directory '" + out + "'" +
                                        (ec ? ": " + ec.message() : std::string()));
  }
  return dir;
}

std::vector<Contribution> load_log(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot open log '" + path + "'");
  return read_contributions(in);
}

std::string percent(double fraction) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(1) << round_one_decimal(100.0 * fraction) << '%';
  return os.str();
}

// ---------------------------------------------------------------------------

struct SimulateArgs {
  EngineFlags engine;
  std::uint64_t seed = 1;
  std::string out = "out";
  std::size_t tasks = 1000;
  std::string labels = "6";
  std::size_t players = 200;
  double spammer_fraction = 0.15;
  std::size_t controls = 0;
  std::size_t min_rounds = 3;
};

int cmd_simulate(const SimulateArgs& args) {
  RunManifest manifest;
  manifest.command = "simulate";
  manifest.started_at = utc_timestamp();
  manifest.config = args.engine.resolve();

  WorldParams params;
  params.n_tasks = args.tasks;
  params.labels = parse_label_flag(args.labels);
  params.n_players = args.players;
  params.spammer_fraction = args.spammer_fraction;
  params.n_controls = args.controls;
  params.min_rounds = args.min_rounds;
  validate_config(manifest.config, params.labels);

  const auto dir = prepare_out_dir(args.out);
  const World world = generate_world(params, args.seed);
  const ExperimentResult run = run_experiment(world, manifest.config, args.seed);

  manifest.seeds = {{"world", args.seed}, {"engine", args.seed}};
  manifest.parameters = {{"tasks", params.n_tasks},
                         {"labels", params.labels.labels()},
                         {"players", params.n_players},
                         {"spammer_fraction", params.spammer_fraction},
                         {"controls", world.controls.size()},
                         {"min_rounds", params.min_rounds},
                         {"difficulty_penalty", params.difficulty_penalty},
                         {"honest_accuracy_beta", {params.honest_accuracy.a, params.honest_accuracy.b}},
                         {"confusability_beta", {params.confusability.a, params.confusability.b}}};
  const auto log_path = (dir / "contributions.jsonl").string();
  const auto results_path = (dir / "results.json").string();
  const auto manifest_path = (dir / "manifest.json").string();
  manifest.outputs = {{"contributions", log_path}, {"results", results_path}, {"manifest", manifest_path}};

  std::ostringstream log;
  write_contributions(log, run.contributions);
  write_text_file(log_path, log.str());
  manifest.finished_at = utc_timestamp();
  write_text_file(results_path, results_to_json(run.report, params.labels, manifest).dump(2) + "\n");
  write_text_file(manifest_path, to_json(manifest).dump(2) + "\n");

  const auto theoretical = theoretical_redundancy(params.n_tasks, params.labels.size(),
                                                  static_cast<std::uint64_t>(manifest.config.min_agreement));
  std::cout << "status " << to_string(run.report.status) << ", solved " << run.report.labels().size() << "/"
            << params.n_tasks << ", contributions " << run.report.contributions << " vs theoretical " << theoretical
            << " (" << std::fixed << std::setprecision(1)
            << round_one_decimal(redundancy_saving(static_cast<double>(run.report.contributions),
                                                   static_cast<double>(theoretical)))
            << "%)\n";
  if (run.report.status == RunStatus::Starvation) {
    std::cerr << "gwap: Starvation: player stream ended with " << run.report.unsolved().size()
              << " unsolved task(s); partial results written\n";
    return kExitStarvation;
  }
  return 0;
}

// ---------------------------------------------------------------------------

struct ReplayArgs {
  EngineFlags engine;
  std::string log;
  std::string labels;
  std::string out = ".";
};

int cmd_replay(const ReplayArgs& args) {
  RunManifest manifest;
  manifest.command = "replay";
  manifest.started_at = utc_timestamp();
  manifest.config = args.engine.resolve();
  manifest.inputs = {{"log", args.log}};

  const auto contributions = load_log(args.log);
  const LabelSet labels = args.labels.empty() ? labels_from_contributions(contributions) : parse_label_flag(args.labels);
  validate_config(manifest.config, labels);
  const auto report = replay_contributions(contributions, labels, manifest.config);

  const auto dir = prepare_out_dir(args.out);
  const auto results_path = (dir / "results.json").string();
  manifest.outputs = {{"results", results_path}};
  manifest.finished_at = utc_timestamp();
  write_text_file(results_path, results_to_json(report, labels, manifest).dump(2) + "\n");

  const auto unsolved = report.unsolved();
  std::cout << "replayed " << report.rounds << " rounds, solved " << report.labels().size() << "/"
            << report.tasks.size() << ", unsolved " << unsolved.size() << "\n";
  return 0;
}

// ---------------------------------------------------------------------------

struct CompareArgs {
  std::string log;
  std::string results;
  std::vector<std::string> algorithms{"mv", "em", "mp"};
  std::uint64_t seed = 1;
  std::string out;
};

int cmd_compare(const CompareArgs& args) {
  for (const auto& a : args.algorithms) {
    if (a != "mv" && a != "em" && a != "mp") {
      throw Error(ErrorCode::UnknownAlgorithm, "unknown algorithm '" + a + "' (expected mv, em or mp)");
    }
  }
  RunManifest manifest;
  manifest.command = "compare";
  manifest.started_at = utc_timestamp();
  manifest.inputs = {{"log", args.log}, {"results", args.results}};
  manifest.seeds = {{"baselines", args.seed}};

  const auto contributions = load_log(args.log);
  const auto results = results_from_json(read_json_file(args.results));
  const LabelSet labels = results.labels ? *results.labels : labels_from_contributions(contributions);
  const ContributionLog log(contributions, labels);
  const auto incremental = results.solved_labels();

  auto restrict = [&](const std::map<std::string, std::string>& all, const std::string& name) {
    std::map<std::string, std::string> out;
    for (const auto& [id, label] : incremental) {
      auto it = all.find(id);
      if (it == all.end()) {
        throw Error(ErrorCode::KeyMismatch, "task '" + id + "' is solved in the results but absent from the log (" +
                                                name + ")");
      }
      out.emplace(id, it->second);
    }
    return out;
  };

  Json reports = Json::object();
  struct Row {
    std::string name;
    ComparisonReport report;
  };
  std::vector<Row> rows;
  for (const auto& a : args.algorithms) {
    std::map<std::string, std::string> labels_b;
    if (a == "mv") labels_b = majority_vote(log, args.seed).labels;
    else if (a == "em") labels_b = dawid_skene_em(log).labels;
    else labels_b = message_passing(log, 20, args.seed).labels;
    auto report = agreement_report(incremental, restrict(labels_b, a), labels);
    for (const auto& [id, label] : incremental) {
      report.per_task_contribution_counts.emplace(id, results.tasks.at(id).contribution_count);
    }
    reports[a] = to_json(report);
    rows.push_back(Row{a, std::move(report)});
  }

  const fs::path dir = prepare_out_dir(args.out.empty() ? fs::path(args.results).parent_path().string() : args.out);
  const auto out_path = (dir / "comparison.json").string();
  manifest.outputs = {{"comparison", out_path}};
  manifest.finished_at = utc_timestamp();

  Json doc;
  doc["labels"] = labels.labels();
  doc["compared_tasks"] = incremental.size();
  doc["reports"] = reports;
  doc["baseline_settings"] = {
      {"mv", "modal label; ties drawn uniformly with a generator seeded by (seed, task id)"},
      {"em", "Dawid-Skene; majority-vote soft init; additive smoothing 0.01; max_iters 100; tol 1e-6; "
             "argmax ties to lowest label index"},
      {"mp", "one-vs-rest +1/-1 message passing; 20 iterations; Uniform(0.5,1.5) init; degree-averaged "
             "player messages; ties to vote counts then lowest label index"}};
  doc["manifest"] = to_json(manifest);
  write_text_file(out_path, doc.dump(2) + "\n");

  static const std::map<std::string, std::string> names{{"mv", "MV"}, {"em", "EM"}, {"mp", "MP"}};
  std::cout << std::left << std::setw(10) << "Algorithm" << std::right << std::setw(9) << "% diff." << std::setw(10)
            << "Accuracy" << std::setw(9) << "Kappa" << std::setw(9) << "Rand" << "\n";
  for (const auto& r : rows) {
    std::cout << std::left << std::setw(10) << names.at(r.name) << std::right << std::setw(9)
              << percent(r.report.percent_diff / 100.0) << std::setw(10) << percent(r.report.accuracy) << std::setw(9)
              << percent(r.report.kappa) << std::setw(9) << percent(r.report.adjusted_rand) << "\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Incremental truth inference for game-collected labels"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kToolVersion);

  SimulateArgs sim;
  auto* simulate = app.add_subcommand("simulate", "Simulate players, run incremental inference, write the log");
  sim.engine.attach(simulate);
  simulate->add_option("--seed", sim.seed, "World and engine seed");
  simulate->add_option("--out", sim.out, "Output directory");
  simulate->add_option("--tasks", sim.tasks, "Number of unsolved tasks");
  simulate->add_option("--labels", sim.labels, "Label count, or comma-separated label names");
  simulate->add_option("--players", sim.players, "Number of players");
  simulate->add_option("--spammer-fraction", sim.spammer_fraction, "Fraction of players answering at random");
  simulate->add_option("--controls", sim.controls, "Initial ground-truth tasks (0: max(10, tasks/10))");
  simulate->add_option("--min-rounds", sim.min_rounds, "Shortest player session, in rounds");

  ReplayArgs rep;
  auto* replay = app.add_subcommand("replay", "Feed a recorded contribution log through the incremental engine");
  rep.engine.attach(replay);
  replay->add_option("--log", rep.log, "contributions.jsonl to replay")->required();
  replay->add_option("--labels", rep.labels, "Label count or names (default: labels seen in the log)");
  replay->add_option("--out", rep.out, "Output directory for results.json");

  CompareArgs cmp;
  auto* compare = app.add_subcommand("compare", "Compare incremental results with ex-post aggregators");
  compare->add_option("--log", cmp.log, "contributions.jsonl")->required();
  compare->add_option("--results", cmp.results, "results.json of the incremental run")->required();
  compare->add_option("--algorithms", cmp.algorithms, "Subset of mv, em, mp")->delimiter(',');
  compare->add_option("--seed", cmp.seed, "Seed for majority-vote ties and message-passing init");
  compare->add_option("--out", cmp.out, "Output directory (default: next to the results file)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (*simulate) return cmd_simulate(sim);
    if (*replay) return cmd_replay(rep);
    if (*compare) return cmd_compare(cmp);
  } catch (const Error& e) {
    std::cerr << "gwap: " << e.what() << "\n";
    for (const auto& d : e.details()) std::cerr << "  - " << d << "\n";
    return kExitError;
  } catch (const std::exception& e) {
    std::cerr << "gwap: " << e.what() << "\n";
    return kExitError;
  }
  return kExitError;
}

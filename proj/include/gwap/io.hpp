#pragma once

// File formats: the JSON-lines contribution log, results.json,
// comparison.json, manifest.json and the key = value engine config file.

#include <cctype>
#include <chrono>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "gwap/core.hpp"
#include "gwap/engine.hpp"
#include "gwap/error.hpp"
#include "gwap/metrics.hpp"

namespace gwap {

using Json = nlohmann::ordered_json;

inline constexpr const char* kToolVersion = "0.1.0";

// ---------------------------------------------------------------------------
// Domain values

inline Json to_json(const Contribution& c) {
  Json j;
  j["round_id"] = c.round_id;
  j["player_id"] = c.player_id;
  j["task_id"] = c.task_id;
  j["label"] = c.label;
  j["is_control"] = c.is_control;
  if (c.is_control && c.true_label) j["true_label"] = *c.true_label;
  return j;
}

namespace detail {

template <typename T>
T require_field(const Json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end()) throw Error(ErrorCode::ParseError, std::string("missing field '") + key + "'");
  try {
    return it->template get<T>();
  } catch (const nlohmann::json::exception&) {
    throw Error(ErrorCode::ParseError, std::string("field '") + key + "' has the wrong type");
  }
}

}  // namespace detail

inline Contribution contribution_from_json(const Json& j) {
  if (!j.is_object()) throw Error(ErrorCode::ParseError, "contribution is not a JSON object");
  Contribution c;
  if (!j.contains("round_id") || !j["round_id"].is_number_integer()) {
    throw Error(ErrorCode::ParseError, "field 'round_id' must be an integer");
  }
  c.round_id = j["round_id"].get<long long>();
  c.player_id = detail::require_field<std::string>(j, "player_id");
  c.task_id = detail::require_field<std::string>(j, "task_id");
  c.label = detail::require_field<std::string>(j, "label");
  c.is_control = detail::require_field<bool>(j, "is_control");
  if (c.is_control) {
    c.true_label = detail::require_field<std::string>(j, "true_label");
  } else if (j.contains("true_label")) {
    throw Error(ErrorCode::ParseError, "true_label is only allowed on control answers");
  }
  return c;
}

inline Json to_json(const Task& t) {
  Json j;
  j["id"] = t.id;
  j["state"] = std::string(to_string(t.state));
  j["true_label"] = t.true_label ? Json(*t.true_label) : Json(nullptr);
  j["contribution_count"] = t.contribution_count;
  return j;
}

inline Task task_from_json(const Json& j) {
  Task t;
  t.id = detail::require_field<std::string>(j, "id");
  const auto state = detail::require_field<std::string>(j, "state");
  if (state == "unsolved") t.state = TaskState::Unsolved;
  else if (state == "solved") t.state = TaskState::Solved;
  else if (state == "control") t.state = TaskState::Control;
  else throw Error(ErrorCode::ParseError, "unknown task state '" + state + "'");
  if (j.contains("true_label") && !j["true_label"].is_null()) t.true_label = j["true_label"].get<std::string>();
  t.contribution_count = detail::require_field<std::size_t>(j, "contribution_count");
  return t;
}

inline Json to_json(const ScoreRow& r) {
  Json j;
  j["task_id"] = r.task_id;
  j["scores"] = r.scores;
  return j;
}

inline ScoreRow score_row_from_json(const Json& j) {
  return ScoreRow(detail::require_field<std::string>(j, "task_id"),
                  detail::require_field<std::vector<double>>(j, "scores"));
}

// The answerer's view of a round: no control flags.
inline Json to_json(const RoundAssignment& a) {
  Json j;
  j["player_id"] = a.player_id;
  j["round_id"] = a.round_id;
  j["tasks"] = a.tasks;
  return j;
}

inline Json to_json(const EngineConfig& c) {
  Json j;
  j["threshold"] = c.threshold;
  j["increment"] = c.increment;
  j["decrement"] = c.decrement;
  j["alpha"] = c.alpha;
  j["min_agreement"] = c.min_agreement;
  j["reliability_mode"] = std::string(to_string(c.reliability_mode));
  j["control_tasks_per_round"] = c.control_tasks_per_round;
  j["tasks_per_round"] = c.tasks_per_round;
  j["promote_solved_to_control"] = c.promote_solved_to_control;
  return j;
}

// ---------------------------------------------------------------------------
// Contribution log (JSON lines)

inline void write_contributions(std::ostream& out, const std::vector<Contribution>& contributions) {
  for (const auto& c : contributions) out << to_json(c).dump() << '\n';
}

// Blank lines are skipped; any other malformed line raises ParseError naming
// its 1-based line number.
inline std::vector<Contribution> read_contributions(std::istream& in) {
  std::vector<Contribution> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(contribution_from_json(Json::parse(line)));
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::ParseError, "line " + std::to_string(line_no) + ": " + e.what());
    } catch (const Error& e) {
      throw Error(ErrorCode::ParseError, "line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

// Groups a log into rounds. Answers of one round must be contiguous, share a
// player and appear in nondecreasing round_id order.
inline std::vector<RecordedRound> group_rounds(const std::vector<Contribution>& contributions) {
  std::vector<RecordedRound> rounds;
  std::set<long long> closed;
  for (const auto& c : contributions) {
    if (rounds.empty() || rounds.back().round_id != c.round_id) {
      if (!rounds.empty() && c.round_id < rounds.back().round_id) {
        throw Error(ErrorCode::OutOfOrderRounds, "round " + std::to_string(c.round_id) + " appears after round " +
                                                     std::to_string(rounds.back().round_id));
      }
      if (closed.count(c.round_id)) {
        throw Error(ErrorCode::OutOfOrderRounds, "round " + std::to_string(c.round_id) + " is not contiguous");
      }
      closed.insert(c.round_id);
      rounds.push_back(RecordedRound{c.player_id, c.round_id, {}});
    } else if (rounds.back().player_id != c.player_id) {
      throw Error(ErrorCode::ParseError, "round " + std::to_string(c.round_id) + " mixes players '" +
                                             rounds.back().player_id + "' and '" + c.player_id + "'");
    }
    rounds.back().entries.push_back(
        RoundEntry{c.task_id, c.label, c.is_control ? c.true_label : std::optional<std::string>{}});
  }
  return rounds;
}

// Label set of a log when none is given: every label seen, sorted.
inline LabelSet labels_from_contributions(const std::vector<Contribution>& contributions) {
  std::set<std::string> seen;
  for (const auto& c : contributions) {
    seen.insert(c.label);
    if (c.true_label) seen.insert(*c.true_label);
  }
  return LabelSet(std::vector<std::string>(seen.begin(), seen.end()));
}

// Re-runs incremental inference over a recorded log, round by round in log
// order. The task pool is every task answered as a non-control task.
inline AggregationReport replay_contributions(const std::vector<Contribution>& contributions, const LabelSet& labels,
                                              const EngineConfig& config) {
  const auto rounds = group_rounds(contributions);
  std::vector<std::string> task_ids;
  std::set<std::string> seen;
  for (const auto& c : contributions) {
    if (!c.is_control && seen.insert(c.task_id).second) task_ids.push_back(c.task_id);
  }
  // Initial ground truth never enters the pool; promoted tasks do.
  Engine engine(labels, config, task_ids);
  for (const auto& r : rounds) engine.apply_round(r);
  return engine.report();
}

// ---------------------------------------------------------------------------
// Manifest

struct RunManifest {
  std::string command;
  std::string tool_version = kToolVersion;
  EngineConfig config;
  std::map<std::string, std::uint64_t> seeds;
  std::map<std::string, std::string> inputs;
  std::map<std::string, std::string> outputs;
  Json parameters = Json::object();
  std::string started_at;
  std::string finished_at;
};

inline std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  std::ostringstream os;
  os << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return os.str();
}

inline Json to_json(const RunManifest& m) {
  Json j;
  j["command"] = m.command;
  j["tool_version"] = m.tool_version;
  j["config"] = to_json(m.config);
  j["seeds"] = m.seeds;
  j["inputs"] = m.inputs;
  j["outputs"] = m.outputs;
  j["parameters"] = m.parameters;
  j["started_at"] = m.started_at;
  j["finished_at"] = m.finished_at;
  return j;
}

// ---------------------------------------------------------------------------
// results.json

inline Json results_to_json(const AggregationReport& report, const LabelSet& labels, const RunManifest& manifest) {
  Json j;
  j["status"] = std::string(to_string(report.status));
  j["labels"] = labels.labels();
  j["rounds"] = report.rounds;
  j["contributions"] = report.contributions;
  Json tasks = Json::object();
  for (const auto& [id, t] : report.tasks) {
    Json e;
    e["label"] = t.label ? Json(*t.label) : Json(nullptr);
    e["contribution_count"] = t.contribution_count;
    e["solved"] = t.label.has_value();
    e["scores"] = t.scores;
    tasks[id] = std::move(e);
  }
  j["results"] = std::move(tasks);
  j["manifest"] = to_json(manifest);
  return j;
}

struct ResultsFile {
  RunStatus status = RunStatus::Complete;
  std::optional<LabelSet> labels;
  std::map<std::string, TaskOutcome> tasks;

  std::map<std::string, std::string> solved_labels() const {
    std::map<std::string, std::string> out;
    for (const auto& [id, t] : tasks) {
      if (t.label) out.emplace(id, *t.label);
    }
    return out;
  }
};

inline ResultsFile results_from_json(const Json& j) {
  ResultsFile r;
  if (!j.is_object() || !j.contains("results") || !j["results"].is_object()) {
    throw Error(ErrorCode::ParseError, "results file has no 'results' object");
  }
  if (j.contains("status")) r.status = j["status"] == "complete" ? RunStatus::Complete : RunStatus::Starvation;
  if (j.contains("labels")) r.labels = LabelSet(j["labels"].get<std::vector<std::string>>());
  for (const auto& [id, e] : j["results"].items()) {
    TaskOutcome t;
    if (e.contains("label") && !e["label"].is_null()) t.label = e["label"].get<std::string>();
    t.contribution_count = detail::require_field<std::size_t>(e, "contribution_count");
    if (e.contains("scores")) t.scores = e["scores"].get<std::vector<double>>();
    r.tasks.emplace(id, std::move(t));
  }
  return r;
}

// ---------------------------------------------------------------------------
// comparison.json

inline Json to_json(const ComparisonReport& r) {
  Json j;
  j["n_tasks"] = r.n_tasks;
  j["percent_diff"] = round_one_decimal(r.percent_diff);
  j["accuracy"] = r.accuracy;
  j["kappa"] = r.kappa;
  j["adjusted_rand"] = r.adjusted_rand;
  j["confusion"] = r.confusion;
  j["per_task_contribution_counts"] = r.per_task_contribution_counts;
  return j;
}

// ---------------------------------------------------------------------------
// Engine config file: one "key = value" per line, '#' starts a comment.

// Applies the file's settings to `config`; returns the keys that were set.
inline std::set<std::string> apply_config_text(std::istream& in, EngineConfig& config) {
  std::set<std::string> seen;
  std::string line;
  std::size_t line_no = 0;
  auto trim = [](std::string s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return std::string();
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
  };
  while (std::getline(in, line)) {
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    const auto where = "config line " + std::to_string(line_no) + ": ";
    if (eq == std::string::npos) throw Error(ErrorCode::ParseError, where + "expected 'key = value'");
    const auto key = trim(line.substr(0, eq));
    const auto value = trim(line.substr(eq + 1));

    auto as_double = [&]() {
      try {
        std::size_t used = 0;
        double v = std::stod(value, &used);
        if (used != value.size()) throw std::invalid_argument(value);
        return v;
      } catch (const std::exception&) {
        throw Error(ErrorCode::ParseError, where + "'" + key + "' expects a number, got '" + value + "'");
      }
    };
    auto as_int = [&]() {
      const double v = as_double();
      if (v != static_cast<double>(static_cast<int>(v))) {
        throw Error(ErrorCode::ParseError, where + "'" + key + "' expects an integer");
      }
      return static_cast<int>(v);
    };
    auto as_bool = [&]() {
      std::string v = value;
      for (auto& ch : v) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
      if (v == "true" || v == "1" || v == "yes") return true;
      if (v == "false" || v == "0" || v == "no") return false;
      throw Error(ErrorCode::ParseError, where + "'" + key + "' expects true or false");
    };

    if (key == "threshold") config.threshold = as_double();
    else if (key == "increment") config.increment = as_double();
    else if (key == "decrement") config.decrement = as_double();
    else if (key == "alpha") config.alpha = as_double();
    else if (key == "min_agreement") config.min_agreement = as_int();
    else if (key == "control_tasks_per_round") config.control_tasks_per_round = as_int();
    else if (key == "tasks_per_round") config.tasks_per_round = as_int();
    else if (key == "promote_solved_to_control") config.promote_solved_to_control = as_bool();
    else if (key == "reliability_mode") {
      auto mode = parse_reliability_mode(value);
      if (!mode) throw Error(ErrorCode::ParseError, where + "unknown reliability_mode '" + value + "'");
      config.reliability_mode = *mode;
    } else {
      throw Error(ErrorCode::ParseError, where + "unknown key '" + key + "'");
    }
    seen.insert(key);
  }
  return seen;
}

// ---------------------------------------------------------------------------
// Files

inline void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::IoError, "cannot open '" + path + "' for writing");
  out << text;
  out.flush();
  if (!out) throw Error(ErrorCode::IoError, "failed writing '" + path + "'");
}

inline std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot open '" + path + "' for reading");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline Json read_json_file(const std::string& path) {
  const auto text = read_text_file(path);
  try {
    return Json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ParseError, path + ": " + e.what());
  }
}

}  // namespace gwap

#pragma once

// Domain types shared by the incremental engine, the ex-post baselines, the
// simulator and the metrics.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "gwap/error.hpp"

namespace gwap {

using LabelIndex = std::size_t;

// Ordered set of admissible labels. Score vectors index by position, so the
// order is fixed once constructed.
class LabelSet {
 public:
  LabelSet() = default;

  explicit LabelSet(std::vector<std::string> labels) : labels_(std::move(labels)) {
    for (std::size_t i = 0; i < labels_.size(); ++i) {
      index_.emplace(labels_[i], i);
    }
  }

  // Labels "v1".."vL".
  static LabelSet numbered(std::size_t count) {
    std::vector<std::string> labels;
    labels.reserve(count);
    for (std::size_t i = 1; i <= count; ++i) labels.push_back("v" + std::to_string(i));
    return LabelSet(std::move(labels));
  }

  std::size_t size() const noexcept { return labels_.size(); }
  const std::vector<std::string>& labels() const noexcept { return labels_; }
  const std::string& at(LabelIndex i) const { return labels_.at(i); }

  bool contains(std::string_view label) const {
    return index_.find(std::string(label)) != index_.end();
  }

  std::optional<LabelIndex> find(std::string_view label) const {
    auto it = index_.find(std::string(label));
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }

  LabelIndex index_of(std::string_view label) const {
    auto it = index_.find(std::string(label));
    if (it == index_.end()) {
      throw Error(ErrorCode::UnknownLabel, "label '" + std::string(label) + "' is not in the label set");
    }
    return it->second;
  }

  // True iff identifiers are unique (duplicates collapse in the index).
  bool unique() const noexcept { return index_.size() == labels_.size(); }

  friend bool operator==(const LabelSet& a, const LabelSet& b) { return a.labels_ == b.labels_; }

 private:
  std::vector<std::string> labels_;
  std::unordered_map<std::string, LabelIndex> index_;
};

enum class TaskState { Unsolved, Solved, Control };

constexpr std::string_view to_string(TaskState s) noexcept {
  switch (s) {
    case TaskState::Unsolved: return "unsolved";
    case TaskState::Solved: return "solved";
    case TaskState::Control: return "control";
  }
  return "unsolved";
}

struct Task {
  std::string id;
  TaskState state = TaskState::Unsolved;
  std::optional<std::string> true_label;  // present iff Solved or Control
  std::size_t contribution_count = 0;

  friend bool operator==(const Task&, const Task&) = default;
};

// One answer, i.e. one non-empty cell of the contribution matrix. Control
// answers also carry the known solution of the control task.
struct Contribution {
  std::string player_id;
  std::string task_id;
  long long round_id = 0;
  std::string label;
  bool is_control = false;
  std::optional<std::string> true_label;

  friend bool operator==(const Contribution&, const Contribution&) = default;
};

struct ScoreRow {
  std::string task_id;
  std::vector<double> scores;

  ScoreRow() = default;
  ScoreRow(std::string id, std::size_t n_labels) : task_id(std::move(id)), scores(n_labels, 0.0) {}
  ScoreRow(std::string id, std::vector<double> values) : task_id(std::move(id)), scores(std::move(values)) {}

  friend bool operator==(const ScoreRow&, const ScoreRow&) = default;
};

struct ReliabilityRecord {
  std::string player_id;
  long long round_id = 0;
  std::size_t errors = 0;
  std::size_t control_count = 1;
  double quality = 1.0;

  friend bool operator==(const ReliabilityRecord&, const ReliabilityRecord&) = default;
};

enum class ReliabilityMode { Exponential, LinearFraction };

constexpr std::string_view to_string(ReliabilityMode m) noexcept {
  return m == ReliabilityMode::Exponential ? "exponential" : "linear_fraction";
}

inline std::optional<ReliabilityMode> parse_reliability_mode(std::string_view s) {
  if (s == "exponential") return ReliabilityMode::Exponential;
  if (s == "linear_fraction" || s == "linear") return ReliabilityMode::LinearFraction;
  return std::nullopt;
}

struct EngineConfig {
  double threshold = 2.5;   // completion threshold on the maximal score
  double increment = 1.0;   // added to the answered label, scaled by quality
  double decrement = 0.0;   // removed from the other labels, scaled by quality; 0 disables
  double alpha = 0.7;       // exponential reliability decay per control error
  int min_agreement = 3;
  ReliabilityMode reliability_mode = ReliabilityMode::Exponential;
  int control_tasks_per_round = 2;
  int tasks_per_round = 6;
  bool promote_solved_to_control = true;

  // Default calibration for a required agreement p: increment 1 and
  // threshold p - 0.5, so p fully reliable agreeing answers solve a task.
  static EngineConfig for_agreement(int p) {
    EngineConfig c;
    c.min_agreement = p;
    c.increment = 1.0;
    c.threshold = static_cast<double>(p) - 0.5;
    return c;
  }

  friend bool operator==(const EngineConfig&, const EngineConfig&) = default;
};

// Returns the config unchanged when every constraint holds; otherwise throws
// ConfigInvalid listing all violations.
inline const EngineConfig& validate_config(const EngineConfig& config, const LabelSet& labels) {
  std::vector<std::string> violations;
  auto fail = [&](std::string msg) { violations.push_back(std::move(msg)); };
  auto fmt = [](double v) {
    std::ostringstream os;
    os << v;
    return os.str();
  };

  if (labels.size() < 2) fail("label set needs at least 2 labels, got " + std::to_string(labels.size()));
  if (!labels.unique()) fail("label identifiers are not unique");
  if (!(config.increment > 0.0) || !std::isfinite(config.increment)) fail("increment must be positive");
  if (!(config.decrement >= 0.0) || !std::isfinite(config.decrement)) fail("decrement must be nonnegative");
  if (!(config.alpha > 0.0) || !std::isfinite(config.alpha)) fail("alpha must be positive");
  if (!(config.threshold > 0.0) || !std::isfinite(config.threshold)) fail("threshold must be positive");
  if (config.min_agreement < 2) fail("min_agreement must be at least 2");
  if (config.control_tasks_per_round < 1) fail("control_tasks_per_round must be positive");
  if (config.tasks_per_round < 1) fail("tasks_per_round must be positive");

  if (config.min_agreement >= 2 && config.increment > 0.0 && config.threshold > 0.0) {
    const double p = config.min_agreement;
    if (!(config.threshold > (p - 1.0) * config.increment)) {
      fail("threshold " + fmt(config.threshold) + " must exceed (p-1)*increment = " +
           fmt((p - 1.0) * config.increment) + " so that p-1 perfect answers do not solve a task");
    }
    // Completion needs the score to strictly exceed the threshold.
    if (!(config.threshold < p * config.increment)) {
      fail("threshold " + fmt(config.threshold) + " is not below p*increment = " + fmt(p * config.increment) +
           ": unreachable by p perfect answers");
    }
  }

  if (!violations.empty()) {
    const auto message = "invalid engine configuration (" + std::to_string(violations.size()) + " violation(s))";
    throw Error(ErrorCode::ConfigInvalid, message, std::move(violations));
  }
  return config;
}

}  // namespace gwap

#pragma once

// Incremental truth inference: per-round assignment of unsolved and control
// tasks, per-round reliability from control errors, reliability-weighted score
// updates and completion detection after every single answer.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include "gwap/core.hpp"
#include "gwap/error.hpp"
#include "gwap/seeding.hpp"

namespace gwap {

// Player quality for one round: exp(-alpha * errors) or the fraction of
// correct control answers.
inline double compute_reliability(std::size_t errors, std::size_t control_count, const EngineConfig& config) {
  if (control_count == 0) throw Error(ErrorCode::DomainError, "control_count must be positive");
  if (errors > control_count) {
    throw Error(ErrorCode::DomainError, "errors (" + std::to_string(errors) + ") exceed control_count (" +
                                            std::to_string(control_count) + ")");
  }
  switch (config.reliability_mode) {
    case ReliabilityMode::Exponential:
      return std::exp(-config.alpha * static_cast<double>(errors));
    case ReliabilityMode::LinearFraction:
      return 1.0 - static_cast<double>(errors) / static_cast<double>(control_count);
  }
  return 0.0;
}

// The answered label gains increment*quality; with a nonzero decrement every
// other label loses decrement*quality, floored at zero.
inline ScoreRow update_solution_estimate(ScoreRow row, LabelIndex answered, double quality,
                                         const EngineConfig& config) {
  if (answered >= row.scores.size()) {
    throw Error(ErrorCode::UnknownLabel, "label index " + std::to_string(answered) + " out of range for task '" +
                                             row.task_id + "'");
  }
  if (!(quality >= 0.0 && quality <= 1.0)) {
    throw Error(ErrorCode::DomainError, "quality must lie in [0,1]");
  }
  for (std::size_t l = 0; l < row.scores.size(); ++l) {
    if (l == answered) {
      row.scores[l] += config.increment * quality;
    } else if (config.decrement > 0.0) {
      row.scores[l] = std::max(0.0, row.scores[l] - config.decrement * quality);
    }
  }
  return row;
}

inline ScoreRow update_solution_estimate(ScoreRow row, std::string_view answered, double quality,
                                         const EngineConfig& config, const LabelSet& labels) {
  return update_solution_estimate(std::move(row), labels.index_of(answered), quality, config);
}

// The winning label when a unique maximum strictly exceeds the threshold. A
// tie at the maximum never completes the task.
inline std::optional<LabelIndex> check_completion(const ScoreRow& row, const EngineConfig& config) {
  if (row.scores.empty()) return std::nullopt;
  auto best = std::max_element(row.scores.begin(), row.scores.end());
  if (!(*best > config.threshold)) return std::nullopt;
  if (std::count(row.scores.begin(), row.scores.end(), *best) != 1) return std::nullopt;
  return static_cast<LabelIndex>(best - row.scores.begin());
}

// What the answering side sees. Which entries are control tasks stays inside
// the engine.
struct RoundAssignment {
  std::string player_id;
  long long round_id = 0;
  std::vector<std::string> tasks;

  friend bool operator==(const RoundAssignment&, const RoundAssignment&) = default;
};

// One answer of a recorded round; control answers carry the known solution.
struct RoundEntry {
  std::string task_id;
  std::string label;
  std::optional<std::string> control_truth;
};

struct RecordedRound {
  std::string player_id;
  long long round_id = 0;
  std::vector<RoundEntry> entries;  // assignment order
};

struct SolvedTask {
  std::string task_id;
  std::string label;

  friend bool operator==(const SolvedTask&, const SolvedTask&) = default;
};

struct RoundOutcome {
  ReliabilityRecord reliability;
  std::vector<SolvedTask> solved;
  std::vector<std::string> stale;  // answers discarded because the task was already solved
};

enum class RunStatus { Complete, Starvation };

constexpr std::string_view to_string(RunStatus s) noexcept {
  return s == RunStatus::Complete ? "complete" : "starvation";
}

struct TaskOutcome {
  std::optional<std::string> label;  // empty while unsolved
  std::size_t contribution_count = 0;
  std::vector<double> scores;

  friend bool operator==(const TaskOutcome&, const TaskOutcome&) = default;
};

struct AggregationReport {
  RunStatus status = RunStatus::Complete;
  std::map<std::string, TaskOutcome> tasks;  // every task that entered the pool
  std::vector<ReliabilityRecord> reliability_log;
  std::size_t rounds = 0;
  std::size_t contributions = 0;  // accepted non-control answers

  std::map<std::string, std::string> labels() const {
    std::map<std::string, std::string> out;
    for (const auto& [id, t] : tasks) {
      if (t.label) out.emplace(id, *t.label);
    }
    return out;
  }

  std::vector<std::string> unsolved() const {
    std::vector<std::string> out;
    for (const auto& [id, t] : tasks) {
      if (!t.label) out.push_back(id);
    }
    return out;
  }
};

struct PlayerTurn {
  std::string player_id;
  std::function<std::string(const std::string& task_id, long long round_id)> answer;
};

// Yields one round request per call; nullopt ends the stream.
using PlayerStream = std::function<std::optional<PlayerTurn>()>;


// Holds the task pool, the control pool, the score matrix, per-player
// history and the inferred labels. Not thread-safe: callers serialize access.
class Engine {
 public:
  struct ControlTask {
    std::string id;
    std::string true_label;
  };

  Engine(LabelSet labels, EngineConfig config, const std::vector<std::string>& unsolved_task_ids,
         const std::vector<ControlTask>& control_tasks = {})
      : labels_(std::move(labels)), config_(validate_config(config, labels_)) {
    for (const auto& id : unsolved_task_ids) {
      const auto idx = add_task(id);
      tasks_[idx].task.state = TaskState::Unsolved;
      task_pool_.insert(idx);
      entered_pool_.push_back(idx);
    }
    for (const auto& c : control_tasks) {
      labels_.index_of(c.true_label);
      const auto idx = add_task(c.id);
      tasks_[idx].task.state = TaskState::Control;
      tasks_[idx].task.true_label = c.true_label;
      tasks_[idx].gold = true;
      control_pool_.push_back(idx);
    }
  }

  const LabelSet& labels() const noexcept { return labels_; }
  const EngineConfig& config() const noexcept { return config_; }

  std::size_t unsolved_count() const noexcept { return task_pool_.size(); }
  std::size_t control_count() const noexcept { return control_pool_.size(); }
  bool has_unsolved() const noexcept { return !task_pool_.empty(); }

  const Task& task(const std::string& id) const { return tasks_[slot(id)].task; }
  const ScoreRow& score_row(const std::string& id) const { return tasks_[slot(id)].row; }
  const std::map<std::string, std::string>& results() const noexcept { return results_; }
  const std::vector<ReliabilityRecord>& reliability_log() const noexcept { return reliability_log_; }

  // Accepted answers (controls included) in assignment order.
  const std::vector<Contribution>& journal() const noexcept { return journal_; }

  bool has_answered(const std::string& player_id, const std::string& task_id) const {
    auto it = history_.find(player_id);
    if (it == history_.end()) return false;
    auto t = index_.find(task_id);
    return t != index_.end() && it->second.count(t->second) > 0;
  }

  std::vector<std::string> unsolved_ids() const {
    std::vector<std::string> out;
    for (auto idx : task_pool_) out.push_back(tasks_[idx].task.id);
    return out;
  }

  // Draws up to control_tasks_per_round control tasks and tasks_per_round
  // unsolved tasks the player has neither answered nor been assigned, and
  // shuffles them together. The drawn tasks stay reserved for the player until
  // the round is submitted.
  RoundAssignment assign_round(const std::string& player_id, std::uint64_t rng_seed) {
    if (task_pool_.empty()) throw Error(ErrorCode::PoolEmpty, "all tasks are solved");

    const auto seen = [&](std::size_t idx) {
      auto h = history_.find(player_id);
      if (h != history_.end() && h->second.count(idx)) return true;
      auto r = reserved_.find(player_id);
      return r != reserved_.end() && r->second.count(idx) > 0;
    };

    std::vector<std::size_t> open_tasks;
    for (auto idx : task_pool_) {
      if (!seen(idx)) open_tasks.push_back(idx);
    }
    if (open_tasks.empty()) {
      throw Error(ErrorCode::PlayerExhausted, "player '" + player_id + "' has seen every unsolved task");
    }
    std::vector<std::size_t> open_controls;
    for (auto idx : control_pool_) {
      if (!seen(idx)) open_controls.push_back(idx);
    }
    if (open_controls.empty()) {
      throw Error(ErrorCode::PlayerExhausted, "player '" + player_id + "' has seen every control task");
    }

    std::mt19937_64 rng(rng_seed);
    auto draw = [&rng](std::vector<std::size_t>& from, std::size_t k) {
      k = std::min(k, from.size());
      for (std::size_t i = 0; i < k; ++i) {
        std::uniform_int_distribution<std::size_t> pick(i, from.size() - 1);
        std::swap(from[i], from[pick(rng)]);
      }
      from.resize(k);
    };
    draw(open_controls, static_cast<std::size_t>(config_.control_tasks_per_round));
    draw(open_tasks, static_cast<std::size_t>(config_.tasks_per_round));

    std::vector<std::pair<std::size_t, bool>> picked;
    for (auto idx : open_controls) picked.emplace_back(idx, true);
    for (auto idx : open_tasks) picked.emplace_back(idx, false);
    std::shuffle(picked.begin(), picked.end(), rng);

    RoundAssignment out;
    out.player_id = player_id;
    out.round_id = next_round_id_++;
    PendingRound pending;
    pending.player_id = player_id;
    auto& reserved = reserved_[player_id];
    for (const auto& [idx, is_control] : picked) {
      out.tasks.push_back(tasks_[idx].task.id);
      pending.tasks.push_back(idx);
      pending.control_mask.push_back(is_control);
      reserved.insert(idx);
    }
    pending_.emplace(out.round_id, std::move(pending));
    return out;
  }

  // Scores a round produced by assign_round. The answers must cover exactly
  // the assigned tasks; on mismatch nothing changes and the assignment stays
  // open.
  RoundOutcome submit_round(const RoundAssignment& assignment, const std::map<std::string, std::string>& answers) {
    auto it = pending_.find(assignment.round_id);
    if (it == pending_.end() || it->second.player_id != assignment.player_id) {
      throw Error(ErrorCode::AnswerSetMismatch, "round " + std::to_string(assignment.round_id) +
                                                    " is not an open assignment for player '" +
                                                    assignment.player_id + "'");
    }
    const PendingRound& pending = it->second;
    if (answers.size() != pending.tasks.size()) {
      throw Error(ErrorCode::AnswerSetMismatch, "expected " + std::to_string(pending.tasks.size()) +
                                                    " answers, got " + std::to_string(answers.size()));
    }

    RecordedRound round;
    round.player_id = assignment.player_id;
    round.round_id = assignment.round_id;
    for (std::size_t i = 0; i < pending.tasks.size(); ++i) {
      const auto& t = tasks_[pending.tasks[i]].task;
      auto a = answers.find(t.id);
      if (a == answers.end()) {
        throw Error(ErrorCode::AnswerSetMismatch, "missing answer for task '" + t.id + "'");
      }
      labels_.index_of(a->second);
      RoundEntry e{t.id, a->second, std::nullopt};
      if (pending.control_mask[i]) e.control_truth = t.true_label;
      round.entries.push_back(std::move(e));
    }

    auto& reserved = reserved_[assignment.player_id];
    for (auto idx : pending.tasks) reserved.erase(idx);
    pending_.erase(it);
    return apply(round);
  }

  // Feeds a recorded round (e.g. from a contribution log) through the same
  // scoring path as submit_round. Validation happens before any mutation.
  RoundOutcome apply_round(const RecordedRound& round) {
    auto h = history_.find(round.player_id);
    std::unordered_set<std::string> in_round;
    for (const auto& e : round.entries) {
      labels_.index_of(e.label);
      if (e.control_truth) {
        labels_.index_of(*e.control_truth);
        continue;
      }
      auto t = index_.find(e.task_id);
      if (t == index_.end() || tasks_[t->second].gold) {
        throw Error(ErrorCode::UnknownTask, "task '" + e.task_id + "' is not a known unsolved or solved task");
      }
      if (!in_round.insert(e.task_id).second || (h != history_.end() && h->second.count(t->second))) {
        throw Error(ErrorCode::RepeatedContribution,
                    "player '" + round.player_id + "' already answered task '" + e.task_id + "'");
      }
    }
    return apply(round);
  }

  // Plays rounds from the stream until every task is solved or the stream
  // ends. Turns whose player has nothing left to play are skipped; after
  // max_idle_turns consecutive skipped turns the run stops as starved.
  AggregationReport run_to_completion(const PlayerStream& stream, std::uint64_t seed,
                                      std::size_t max_idle_turns = 100000) {
    std::uint64_t turn_index = 0;
    std::size_t idle = 0;
    while (has_unsolved()) {
      auto turn = stream();
      if (!turn) break;
      RoundAssignment assignment;
      try {
        assignment = assign_round(turn->player_id, detail::mix_seed(seed, turn_index++));
      } catch (const Error& e) {
        if (e.code() != ErrorCode::PlayerExhausted) throw;
        if (++idle >= max_idle_turns) break;
        continue;
      }
      idle = 0;
      std::map<std::string, std::string> answers;
      for (const auto& task_id : assignment.tasks) {
        answers.emplace(task_id, turn->answer(task_id, assignment.round_id));
      }
      submit_round(assignment, answers);
    }
    return report();
  }

  AggregationReport report() const {
    AggregationReport r;
    r.status = task_pool_.empty() ? RunStatus::Complete : RunStatus::Starvation;
    for (auto idx : entered_pool_) {
      const auto& slot = tasks_[idx];
      TaskOutcome o;
      auto res = results_.find(slot.task.id);
      if (res != results_.end()) o.label = res->second;
      o.contribution_count = slot.task.contribution_count;
      o.scores = slot.row.scores;
      r.tasks.emplace(slot.task.id, std::move(o));
    }
    r.reliability_log = reliability_log_;
    r.rounds = reliability_log_.size();
    r.contributions = contributions_;
    return r;
  }

 private:
  struct Slot {
    Task task;
    ScoreRow row;
    bool gold = false;  // control task from the start, never scored
  };

  struct PendingRound {
    std::string player_id;
    std::vector<std::size_t> tasks;
    std::vector<bool> control_mask;
  };

  std::size_t add_task(const std::string& id) {
    if (index_.count(id)) throw Error(ErrorCode::BadParameters, "duplicate task id '" + id + "'");
    const auto idx = tasks_.size();
    tasks_.push_back(Slot{Task{id, TaskState::Unsolved, std::nullopt, 0}, ScoreRow(id, labels_.size()), false});
    index_.emplace(id, idx);
    return idx;
  }

  std::size_t slot(const std::string& id) const {
    auto it = index_.find(id);
    if (it == index_.end()) throw Error(ErrorCode::UnknownTask, "unknown task '" + id + "'");
    return it->second;
  }

  RoundOutcome apply(const RecordedRound& round) {
    RoundOutcome out;
    std::size_t errors = 0, controls = 0;
    for (const auto& e : round.entries) {
      if (!e.control_truth) continue;
      ++controls;
      if (e.label != *e.control_truth) ++errors;
    }
    if (controls == 0) {
      throw Error(ErrorCode::MissingControls, "round " + std::to_string(round.round_id) + " of player '" +
                                                  round.player_id + "' has no control answers");
    }
    const double quality = compute_reliability(errors, controls, config_);
    out.reliability = ReliabilityRecord{round.player_id, round.round_id, errors, controls, quality};
    reliability_log_.push_back(out.reliability);

    auto& history = history_[round.player_id];
    for (const auto& e : round.entries) {
      if (e.control_truth) {
        auto c = index_.find(e.task_id);
        if (c != index_.end()) history.insert(c->second);
        journal_.push_back(Contribution{round.player_id, e.task_id, round.round_id, e.label, true, e.control_truth});
        continue;
      }
      const auto idx = index_.at(e.task_id);
      auto& s = tasks_[idx];
      history.insert(idx);
      if (!task_pool_.count(idx)) {
        out.stale.push_back(e.task_id);
        continue;
      }
      ++s.task.contribution_count;
      ++contributions_;
      journal_.push_back(Contribution{round.player_id, e.task_id, round.round_id, e.label, false, std::nullopt});
      s.row = update_solution_estimate(std::move(s.row), labels_.index_of(e.label), quality, config_);
      if (auto win = check_completion(s.row, config_)) {
        const auto& label = labels_.at(*win);
        task_pool_.erase(idx);
        results_[s.task.id] = label;
        s.task.true_label = label;
        s.task.state = TaskState::Solved;
        if (config_.promote_solved_to_control) {
          s.task.state = TaskState::Control;
          control_pool_.push_back(idx);
        }
        out.solved.push_back(SolvedTask{s.task.id, label});
      }
    }
    return out;
  }

  LabelSet labels_;
  EngineConfig config_;
  std::vector<Slot> tasks_;
  std::unordered_map<std::string, std::size_t> index_;
  std::set<std::size_t> task_pool_;
  std::vector<std::size_t> control_pool_;
  std::vector<std::size_t> entered_pool_;
  std::unordered_map<std::string, std::unordered_set<std::size_t>> history_;
  std::unordered_map<std::string, std::unordered_set<std::size_t>> reserved_;
  std::map<long long, PendingRound> pending_;
  std::map<std::string, std::string> results_;
  std::vector<ReliabilityRecord> reliability_log_;
  std::vector<Contribution> journal_;
  std::size_t contributions_ = 0;
  long long next_round_id_ = 0;
};

}  // namespace gwap

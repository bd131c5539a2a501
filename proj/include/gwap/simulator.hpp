#pragma once

// Synthetic worlds for desk-scale experiments: planted task truths and
// difficulties, honest and spamming players with long-tail session lengths,
// and a deterministic answer model.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "gwap/baselines.hpp"
#include "gwap/core.hpp"
#include "gwap/engine.hpp"
#include "gwap/error.hpp"
#include "gwap/seeding.hpp"

namespace gwap {

struct PlayerProfile {
  std::string id;
  double base_accuracy = 1.0;
  bool is_spammer = false;
  double attention_drift = 0.0;  // per-round accuracy jitter bound
  std::size_t rounds_to_play = 1;
};

struct TaskProfile {
  std::string id;
  std::string true_label;
  double confusability = 0.0;  // in [0, 1)
  std::string confusion_target;
};

struct BetaParams {
  double a = 1.0;
  double b = 1.0;
};

struct WorldParams {
  std::size_t n_tasks = 1000;
  LabelSet labels = LabelSet::numbered(5);
  std::size_t n_players = 200;
  double spammer_fraction = 0.15;
  BetaParams honest_accuracy{8.0, 2.0};
  BetaParams confusability{1.0, 9.0};
  double max_confusability = 0.95;
  double attention_drift = 0.1;
  // Accuracy lost per unit of task confusability.
  double difficulty_penalty = 1.5;
  // Session lengths follow P(k) ~ k^-exponent on [min_rounds, max_rounds];
  // max_rounds = 0 caps at the number of tasks.
  double session_exponent = 2.0;
  std::size_t min_rounds = 3;
  std::size_t max_rounds = 0;
  // Ground-truth tasks seeding the control pool; 0 picks max(10, n_tasks/10).
  std::size_t n_controls = 0;
  std::vector<double> label_priors;  // empty: uniform
};

struct World {
  LabelSet labels;
  std::vector<TaskProfile> tasks;
  std::vector<TaskProfile> controls;
  std::vector<PlayerProfile> players;
  double difficulty_penalty = 1.5;
};

namespace detail {

inline double sample_beta(std::mt19937_64& rng, const BetaParams& p) {
  std::gamma_distribution<double> ga(p.a, 1.0), gb(p.b, 1.0);
  const double x = ga(rng), y = gb(rng);
  return x + y > 0.0 ? x / (x + y) : 0.5;
}

inline std::string padded_id(char prefix, std::size_t i, std::size_t n) {
  const auto width = std::to_string(n == 0 ? 0 : n - 1).size();
  auto digits = std::to_string(i);
  return std::string(1, prefix) + std::string(width > digits.size() ? width - digits.size() : 0, '0') + digits;
}

}  // namespace detail

inline World generate_world(const WorldParams& params, std::uint64_t seed) {
  std::vector<std::string> problems;
  if (params.n_tasks < 1) problems.push_back("n_tasks must be at least 1");
  if (params.n_players < 1) problems.push_back("n_players must be at least 1");
  if (!(params.spammer_fraction >= 0.0 && params.spammer_fraction < 1.0)) problems.push_back("spammer_fraction must lie in [0,1)");
  if (params.labels.size() < 2 || !params.labels.unique()) problems.push_back("need at least 2 distinct labels");
  if (!(params.honest_accuracy.a > 0 && params.honest_accuracy.b > 0)) problems.push_back("accuracy Beta parameters must be positive");
  if (!(params.confusability.a > 0 && params.confusability.b > 0)) problems.push_back("confusability Beta parameters must be positive");
  if (!(params.max_confusability >= 0.0 && params.max_confusability < 1.0)) problems.push_back("max_confusability must lie in [0,1)");
  if (!(params.attention_drift >= 0.0 && params.attention_drift <= 1.0)) problems.push_back("attention_drift must lie in [0,1]");
  if (!(params.session_exponent > 0.0)) problems.push_back("session_exponent must be positive");
  if (params.min_rounds < 1) problems.push_back("min_rounds must be at least 1");
  if (params.max_rounds != 0 && params.max_rounds < params.min_rounds) problems.push_back("max_rounds below min_rounds");
  if (!params.label_priors.empty() && params.label_priors.size() != params.labels.size()) {
    problems.push_back("label_priors must have one entry per label");
  }
  if (!problems.empty()) throw Error(ErrorCode::BadParameters, "invalid world parameters", problems);

  World w;
  w.labels = params.labels;
  w.difficulty_penalty = params.difficulty_penalty;
  const std::size_t L = params.labels.size();

  std::mt19937_64 task_rng(detail::mix_seed(seed, 1));
  const std::vector<double> priors = params.label_priors.empty() ? std::vector<double>(L, 1.0) : params.label_priors;
  std::discrete_distribution<std::size_t> label_dist(priors.begin(), priors.end());
  auto make_task = [&](std::string id) {
    TaskProfile t;
    t.id = std::move(id);
    const auto truth = label_dist(task_rng);
    t.true_label = params.labels.at(truth);
    t.confusability = std::min(detail::sample_beta(task_rng, params.confusability), params.max_confusability);
    std::uniform_int_distribution<std::size_t> other(0, L - 2);
    auto target = other(task_rng);
    if (target >= truth) ++target;
    t.confusion_target = params.labels.at(target);
    return t;
  };
  // Unsolved and control tasks share one shuffled id space, so an id says
  // nothing about which pool a task came from.
  const std::size_t n_controls = params.n_controls ? params.n_controls : std::max<std::size_t>(10, params.n_tasks / 10);
  const std::size_t n_all = params.n_tasks + n_controls;
  std::vector<std::size_t> ids(n_all);
  for (std::size_t i = 0; i < n_all; ++i) ids[i] = i;
  std::shuffle(ids.begin(), ids.end(), task_rng);
  for (std::size_t i = 0; i < n_all; ++i) {
    auto t = make_task(detail::padded_id('t', ids[i], n_all));
    (i < params.n_tasks ? w.tasks : w.controls).push_back(std::move(t));
  }

  std::mt19937_64 player_rng(detail::mix_seed(seed, 2));
  const auto n_spammers = static_cast<std::size_t>(std::llround(params.spammer_fraction * static_cast<double>(params.n_players)));
  std::vector<std::size_t> order(params.n_players);
  for (std::size_t j = 0; j < order.size(); ++j) order[j] = j;
  std::shuffle(order.begin(), order.end(), player_rng);
  std::vector<bool> spam(params.n_players, false);
  for (std::size_t j = 0; j < n_spammers; ++j) spam[order[j]] = true;

  const std::size_t max_rounds = params.max_rounds ? params.max_rounds : std::max(params.n_tasks, params.min_rounds);
  std::vector<double> weights;
  for (std::size_t k = params.min_rounds; k <= max_rounds; ++k) {
    weights.push_back(std::pow(static_cast<double>(k), -params.session_exponent));
  }
  std::discrete_distribution<std::size_t> session(weights.begin(), weights.end());

  for (std::size_t j = 0; j < params.n_players; ++j) {
    PlayerProfile p;
    p.id = detail::padded_id('u', j, params.n_players);
    p.is_spammer = spam[j];
    p.base_accuracy = detail::sample_beta(player_rng, params.honest_accuracy);
    p.attention_drift = params.attention_drift;
    p.rounds_to_play = params.min_rounds + session(player_rng);
    w.players.push_back(p);
  }
  return w;
}

// Deterministic in (player, task, round, seed). Spammers answer uniformly.
// Honest players are right with probability
//   clamp(base_accuracy - confusability * penalty + drift, 0, 1)
// where drift is drawn once per (player, round) from [-attention_drift,
// attention_drift]. A wrong answer goes to the task's confusion target with
// probability confusability, else uniformly to any wrong label.
inline std::string answer_oracle(const PlayerProfile& player, const TaskProfile& task, long long round_index,
                                 std::uint64_t seed, const LabelSet& labels, double difficulty_penalty = 1.5) {
  const std::size_t L = labels.size();
  const auto player_key = detail::fnv1a(player.id);
  const auto round_key = detail::mix_seed(player_key, static_cast<std::uint64_t>(round_index));
  std::mt19937_64 rng(detail::mix_seed(detail::mix_seed(seed, round_key), detail::fnv1a(task.id)));
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  if (player.is_spammer) {
    std::uniform_int_distribution<std::size_t> any(0, L - 1);
    return labels.at(any(rng));
  }

  std::mt19937_64 drift_rng(detail::mix_seed(seed ^ 0x5bd1e995ULL, round_key));
  std::uniform_real_distribution<double> jitter(-1.0, 1.0);
  const double drift = player.attention_drift * jitter(drift_rng);
  const double accuracy = std::clamp(player.base_accuracy - task.confusability * difficulty_penalty + drift, 0.0, 1.0);
  if (unit(rng) < accuracy) return task.true_label;
  if (unit(rng) < task.confusability) return task.confusion_target;
  const auto truth = labels.index_of(task.true_label);
  std::uniform_int_distribution<std::size_t> other(0, L - 2);
  auto pick = other(rng);
  if (pick >= truth) ++pick;
  return labels.at(pick);
}

struct ExperimentResult {
  std::vector<Contribution> contributions;  // accepted answers, controls included, in play order
  AggregationReport report;

  ContributionLog log(const LabelSet& labels) const { return ContributionLog(contributions, labels); }
};

// Plays the world's players through the incremental engine. Players take
// their sessions one after another in a seeded random order, each playing up
// to rounds_to_play consecutive rounds.
inline ExperimentResult run_experiment(const World& world, const EngineConfig& config, std::uint64_t seed) {
  std::vector<std::string> task_ids;
  std::map<std::string, const TaskProfile*> profiles;
  for (const auto& t : world.tasks) {
    task_ids.push_back(t.id);
    profiles.emplace(t.id, &t);
  }
  std::vector<Engine::ControlTask> controls;
  for (const auto& c : world.controls) {
    controls.push_back({c.id, c.true_label});
    profiles.emplace(c.id, &c);
  }
  Engine engine(world.labels, config, task_ids, controls);

  std::vector<std::size_t> order(world.players.size());
  for (std::size_t j = 0; j < order.size(); ++j) order[j] = j;
  std::mt19937_64 rng(detail::mix_seed(seed, 3));
  std::shuffle(order.begin(), order.end(), rng);

  std::size_t next_player = 0, rounds_left = 0;
  const PlayerProfile* current = nullptr;
  const std::uint64_t answer_seed = detail::mix_seed(seed, 4);
  PlayerStream stream = [&]() -> std::optional<PlayerTurn> {
    while (rounds_left == 0) {
      if (next_player == order.size()) return std::nullopt;
      current = &world.players[order[next_player++]];
      rounds_left = current->rounds_to_play;
    }
    --rounds_left;
    const PlayerProfile* player = current;
    return PlayerTurn{player->id, [&, player](const std::string& task_id, long long round_id) {
                        return answer_oracle(*player, *profiles.at(task_id), round_id, answer_seed, world.labels,
                                             world.difficulty_penalty);
                      }};
  };

  ExperimentResult out;
  out.report = engine.run_to_completion(stream, detail::mix_seed(seed, 5));
  out.contributions = engine.journal();
  return out;
}

}  // namespace gwap

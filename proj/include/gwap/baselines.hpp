#pragma once

// Ex-post aggregators run over a complete contribution log: majority vote,
// Dawid-Skene expectation maximization and one-vs-rest iterative message
// passing on the task/player answer graph.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <random>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "gwap/core.hpp"
#include "gwap/error.hpp"
#include "gwap/seeding.hpp"

namespace gwap {

// Sparse answer matrix with dense indices. Control answers are dropped. Tasks
// and players are indexed in sorted id order and edges are sorted by
// (task, player), so every aggregator is independent of input order.
class ContributionLog {
 public:
  struct Edge {
    std::size_t task;
    std::size_t player;
    LabelIndex label;
  };

  ContributionLog() = default;

  ContributionLog(const std::vector<Contribution>& contributions, LabelSet labels) : labels_(std::move(labels)) {
    std::set<std::string> task_ids, player_ids;
    for (const auto& c : contributions) {
      if (c.is_control) continue;
      labels_.index_of(c.label);
      task_ids.insert(c.task_id);
      player_ids.insert(c.player_id);
    }
    tasks_.assign(task_ids.begin(), task_ids.end());
    players_.assign(player_ids.begin(), player_ids.end());
    std::map<std::string, std::size_t> task_index, player_index;
    for (std::size_t i = 0; i < tasks_.size(); ++i) task_index.emplace(tasks_[i], i);
    for (std::size_t j = 0; j < players_.size(); ++j) player_index.emplace(players_[j], j);

    for (const auto& c : contributions) {
      if (c.is_control) continue;
      edges_.push_back(Edge{task_index.at(c.task_id), player_index.at(c.player_id), labels_.index_of(c.label)});
    }
    std::sort(edges_.begin(), edges_.end(), [](const Edge& a, const Edge& b) {
      return a.task != b.task ? a.task < b.task : a.player < b.player;
    });
    for (std::size_t e = 1; e < edges_.size(); ++e) {
      if (edges_[e].task == edges_[e - 1].task && edges_[e].player == edges_[e - 1].player) {
        throw Error(ErrorCode::RepeatedContribution, "player '" + players_[edges_[e].player] +
                                                         "' answered task '" + tasks_[edges_[e].task] + "' twice");
      }
    }
    by_task_.assign(tasks_.size(), {});
    by_player_.assign(players_.size(), {});
    for (std::size_t e = 0; e < edges_.size(); ++e) {
      by_task_[edges_[e].task].push_back(e);
      by_player_[edges_[e].player].push_back(e);
    }
  }

  const LabelSet& labels() const noexcept { return labels_; }
  const std::vector<std::string>& tasks() const noexcept { return tasks_; }
  const std::vector<std::string>& players() const noexcept { return players_; }
  const std::vector<Edge>& edges() const noexcept { return edges_; }
  const std::vector<std::size_t>& task_edges(std::size_t task) const { return by_task_.at(task); }
  const std::vector<std::size_t>& player_edges(std::size_t player) const { return by_player_.at(player); }
  bool empty() const noexcept { return edges_.empty(); }

  // Votes per label for one task.
  std::vector<std::size_t> vote_counts(std::size_t task) const {
    std::vector<std::size_t> counts(labels_.size(), 0);
    for (auto e : by_task_.at(task)) ++counts[edges_[e].label];
    return counts;
  }

 private:
  LabelSet labels_;
  std::vector<std::string> tasks_;
  std::vector<std::string> players_;
  std::vector<Edge> edges_;
  std::vector<std::vector<std::size_t>> by_task_;
  std::vector<std::vector<std::size_t>> by_player_;
};

struct MajorityVoteResult {
  std::map<std::string, std::string> labels;
  std::set<std::string> ties;  // tasks whose label was drawn among tied modes
};

// Modal label per task. Ties are broken uniformly at random with a generator
// seeded from (tie_seed, task id).
inline MajorityVoteResult majority_vote(const ContributionLog& log, std::uint64_t tie_seed) {
  MajorityVoteResult out;
  for (std::size_t i = 0; i < log.tasks().size(); ++i) {
    const auto counts = log.vote_counts(i);
    const auto top = *std::max_element(counts.begin(), counts.end());
    if (top == 0) throw Error(ErrorCode::EmptyTask, "task '" + log.tasks()[i] + "' has no contributions");
    std::vector<LabelIndex> modes;
    for (LabelIndex l = 0; l < counts.size(); ++l) {
      if (counts[l] == top) modes.push_back(l);
    }
    LabelIndex pick = modes.front();
    if (modes.size() > 1) {
      std::mt19937_64 rng(detail::mix_seed(tie_seed, detail::fnv1a(log.tasks()[i])));
      std::uniform_int_distribution<std::size_t> d(0, modes.size() - 1);
      pick = modes[d(rng)];
      out.ties.insert(log.tasks()[i]);
    }
    out.labels.emplace(log.tasks()[i], log.labels().at(pick));
  }
  return out;
}

using Matrix = std::vector<std::vector<double>>;

struct EmModel {
  std::vector<double> class_priors;
  std::map<std::string, Matrix> confusion;  // player -> [true label][answered label]
  std::map<std::string, std::vector<double>> posteriors;
};

struct EmOptions {
  std::size_t max_iters = 100;
  double tol = 1e-6;
  double smoothing = 0.01;
};

struct EmResult {
  EmModel model;
  std::map<std::string, std::string> labels;
  std::size_t iterations = 0;
  bool converged = false;
  // Observed-data log-likelihood of the parameters of each iteration, and the
  // same plus the log-density of the smoothing prior (the quantity the
  // smoothed M-step maximizes).
  std::vector<double> log_likelihood;
  std::vector<double> objective;
};

namespace detail {

inline double log_sum_exp(const std::vector<double>& v) {
  const double m = *std::max_element(v.begin(), v.end());
  if (!std::isfinite(m)) return m;
  double s = 0.0;
  for (double x : v) s += std::exp(x - m);
  return m + std::log(s);
}

inline LabelIndex argmax_lowest(const std::vector<double>& v) {
  return static_cast<LabelIndex>(std::max_element(v.begin(), v.end()) - v.begin());
}

}  // namespace detail

// Dawid-Skene EM. Posteriors start from majority-vote soft counts; the M-step
// re-estimates class priors and per-player confusion matrices with additive
// smoothing; the E-step recomputes task posteriors. Stops when no posterior
// moves by tol or more, or after max_iters.
inline EmResult dawid_skene_em(const ContributionLog& log, const EmOptions& options = {}) {
  if (log.empty()) throw Error(ErrorCode::NoContributions, "contribution log is empty");
  if (options.max_iters < 1) throw Error(ErrorCode::BadParameters, "max_iters must be at least 1");
  if (!(options.tol > 0.0)) throw Error(ErrorCode::BadParameters, "tol must be positive");
  if (!(options.smoothing >= 0.0)) throw Error(ErrorCode::BadParameters, "smoothing must be nonnegative");

  const std::size_t n_tasks = log.tasks().size();
  const std::size_t n_players = log.players().size();
  const std::size_t L = log.labels().size();
  const auto& edges = log.edges();
  const double a = options.smoothing;

  Matrix post(n_tasks, std::vector<double>(L, 0.0));
  for (std::size_t i = 0; i < n_tasks; ++i) {
    const auto counts = log.vote_counts(i);
    const double total = static_cast<double>(log.task_edges(i).size());
    for (std::size_t l = 0; l < L; ++l) post[i][l] = static_cast<double>(counts[l]) / total;
  }

  std::vector<double> priors(L);
  std::vector<Matrix> conf(n_players, Matrix(L, std::vector<double>(L)));
  EmResult result;

  for (std::size_t iter = 1; iter <= options.max_iters; ++iter) {
    // M-step
    for (std::size_t k = 0; k < L; ++k) {
      double s = 0.0;
      for (std::size_t i = 0; i < n_tasks; ++i) s += post[i][k];
      priors[k] = (s + a) / (static_cast<double>(n_tasks) + a * static_cast<double>(L));
    }
    for (auto& m : conf) {
      for (auto& row : m) std::fill(row.begin(), row.end(), a);
    }
    for (const auto& e : edges) {
      for (std::size_t k = 0; k < L; ++k) conf[e.player][k][e.label] += post[e.task][k];
    }
    for (auto& m : conf) {
      for (auto& row : m) {
        double s = 0.0;
        for (double x : row) s += x;
        for (double& x : row) x /= s;
      }
    }

    // E-step
    std::vector<std::vector<double>> logp(n_tasks, std::vector<double>(L));
    for (std::size_t i = 0; i < n_tasks; ++i) {
      for (std::size_t k = 0; k < L; ++k) logp[i][k] = std::log(priors[k]);
    }
    for (const auto& e : edges) {
      for (std::size_t k = 0; k < L; ++k) logp[e.task][k] += std::log(conf[e.player][k][e.label]);
    }
    double ll = 0.0, delta = 0.0;
    for (std::size_t i = 0; i < n_tasks; ++i) {
      const double z = detail::log_sum_exp(logp[i]);
      ll += z;
      for (std::size_t k = 0; k < L; ++k) {
        const double p = std::exp(logp[i][k] - z);
        delta = std::max(delta, std::abs(p - post[i][k]));
        post[i][k] = p;
      }
    }
    double log_prior = 0.0;
    if (a > 0.0) {
      for (double p : priors) log_prior += a * std::log(p);
      for (const auto& m : conf) {
        for (const auto& row : m) {
          for (double x : row) log_prior += a * std::log(x);
        }
      }
    }
    result.log_likelihood.push_back(ll);
    result.objective.push_back(ll + log_prior);
    result.iterations = iter;
    if (delta < options.tol) {
      result.converged = true;
      break;
    }
  }

  result.model.class_priors = priors;
  for (std::size_t j = 0; j < n_players; ++j) result.model.confusion.emplace(log.players()[j], conf[j]);
  for (std::size_t i = 0; i < n_tasks; ++i) {
    result.model.posteriors.emplace(log.tasks()[i], post[i]);
    result.labels.emplace(log.tasks()[i], log.labels().at(detail::argmax_lowest(post[i])));
  }
  return result;
}

// Observed-data log-likelihood of a log under given parameters. Players
// missing from the model make this throw.
inline double em_log_likelihood(const ContributionLog& log, const std::vector<double>& priors,
                                const std::map<std::string, Matrix>& confusion) {
  const std::size_t L = log.labels().size();
  std::vector<std::vector<double>> logp(log.tasks().size(), std::vector<double>(L));
  for (auto& row : logp) {
    for (std::size_t k = 0; k < L; ++k) row[k] = std::log(priors[k]);
  }
  for (const auto& e : log.edges()) {
    const auto& m = confusion.at(log.players()[e.player]);
    for (std::size_t k = 0; k < L; ++k) logp[e.task][k] += std::log(m[k][e.label]);
  }
  double ll = 0.0;
  for (const auto& row : logp) ll += detail::log_sum_exp(row);
  return ll;
}

struct MessagePassingResult {
  std::map<std::string, std::string> labels;
  std::map<std::string, std::vector<double>> decision_values;  // per label, one-vs-rest
};

// Iterative task/player message passing run once per label on a +1/-1
// encoding (answered this label / answered another). Player messages start
// from a seeded Uniform(0.5, 1.5) draw shared by all labels, are averaged
// over the player's other answers rather than summed (session lengths are
// long-tailed, so sums would let the heaviest players dominate) and are
// rescaled to unit RMS after every round. The label with the largest final decision
// value wins; exact ties fall back to vote counts, then to the lowest index.
inline MessagePassingResult message_passing(const ContributionLog& log, std::size_t num_iters = 20,
                                            std::uint64_t rng_seed = 0) {
  if (log.empty()) throw Error(ErrorCode::NoContributions, "contribution log is empty");
  if (num_iters < 1) throw Error(ErrorCode::BadParameters, "num_iters must be at least 1");

  const auto& edges = log.edges();
  const std::size_t n_edges = edges.size();
  const std::size_t L = log.labels().size();

  std::vector<double> init(n_edges);
  {
    std::mt19937_64 rng(rng_seed);
    std::uniform_real_distribution<double> d(0.5, 1.5);
    for (auto& y : init) y = d(rng);
  }

  std::vector<std::vector<double>> decision(log.tasks().size(), std::vector<double>(L, 0.0));
  std::vector<double> A(n_edges), x(n_edges), y(n_edges);
  for (LabelIndex l = 0; l < L; ++l) {
    for (std::size_t e = 0; e < n_edges; ++e) A[e] = edges[e].label == l ? 1.0 : -1.0;
    y = init;
    for (std::size_t it = 0; it < num_iters; ++it) {
      for (std::size_t i = 0; i < log.tasks().size(); ++i) {
        double s = 0.0;
        for (auto e : log.task_edges(i)) s += A[e] * y[e];
        for (auto e : log.task_edges(i)) x[e] = s - A[e] * y[e];
      }
      double sq = 0.0;
      for (std::size_t j = 0; j < log.players().size(); ++j) {
        double s = 0.0;
        for (auto e : log.player_edges(j)) s += A[e] * x[e];
        const auto& pe = log.player_edges(j);
        const double others = pe.size() > 1 ? static_cast<double>(pe.size() - 1) : 1.0;
        for (auto e : pe) {
          y[e] = (s - A[e] * x[e]) / others;
          sq += y[e] * y[e];
        }
      }
      const double rms = std::sqrt(sq / static_cast<double>(n_edges));
      if (rms > 0.0 && std::isfinite(rms)) {
        for (auto& v : y) v /= rms;
      }
    }
    for (std::size_t i = 0; i < log.tasks().size(); ++i) {
      double s = 0.0;
      for (auto e : log.task_edges(i)) s += A[e] * y[e];
      decision[i][l] = s;
    }
  }

  MessagePassingResult out;
  for (std::size_t i = 0; i < log.tasks().size(); ++i) {
    const auto& d = decision[i];
    const double best = *std::max_element(d.begin(), d.end());
    const auto counts = log.vote_counts(i);
    LabelIndex pick = L;
    for (LabelIndex l = 0; l < L; ++l) {
      if (d[l] != best) continue;
      if (pick == L || counts[l] > counts[pick]) pick = l;
    }
    out.labels.emplace(log.tasks()[i], log.labels().at(pick));
    out.decision_values.emplace(log.tasks()[i], d);
  }
  return out;
}

}  // namespace gwap

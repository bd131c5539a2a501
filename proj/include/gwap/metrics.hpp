#pragma once

// Redundancy accounting and agreement statistics between two labelings.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <numeric>
#include <set>
#include <string>
#include <vector>

#include "gwap/core.hpp"
#include "gwap/engine.hpp"
#include "gwap/error.hpp"

namespace gwap {

// Contributions an ex-post majority vote needs to guarantee p agreeing labels
// out of L: N * ((p - 1) * L + 1).
inline std::uint64_t theoretical_redundancy(std::uint64_t n_tasks, std::uint64_t n_labels, std::uint64_t p) {
  if (p < 1) throw Error(ErrorCode::BadParameters, "p must be at least 1");
  if (n_labels < 2) throw Error(ErrorCode::BadParameters, "n_labels must be at least 2");
  return n_tasks * ((p - 1) * n_labels + 1);
}

// Percent change of actual over theoretical contributions; negative is a saving.
inline double redundancy_saving(double actual, double theoretical) {
  if (theoretical == 0.0) throw Error(ErrorCode::DivisionByZero, "theoretical redundancy is zero");
  if (!(theoretical > 0.0)) throw Error(ErrorCode::BadParameters, "theoretical redundancy must be positive");
  return 100.0 * (actual / theoretical - 1.0);
}

inline double round_one_decimal(double percent) { return std::round(percent * 10.0) / 10.0; }

struct ComparisonReport {
  std::size_t n_tasks = 0;
  double percent_diff = 0.0;
  double accuracy = 0.0;
  double kappa = 0.0;
  double adjusted_rand = 0.0;
  std::vector<std::vector<std::size_t>> confusion;  // rows: labeling a, columns: labeling b
  std::map<std::string, std::size_t> per_task_contribution_counts;
};

namespace detail {

inline double choose2(double n) { return n * (n - 1.0) / 2.0; }

}  // namespace detail

// Cohen's kappa from a square contingency table, with the two-rater marginal
// chance term. Returns 1 when both raters use a single identical category.
inline double cohens_kappa(const std::vector<std::vector<std::size_t>>& table) {
  const std::size_t L = table.size();
  double n = 0.0, diag = 0.0;
  std::vector<double> rows(L, 0.0), cols(L, 0.0);
  for (std::size_t r = 0; r < L; ++r) {
    for (std::size_t c = 0; c < L; ++c) {
      const double v = static_cast<double>(table[r][c]);
      n += v;
      rows[r] += v;
      cols[c] += v;
      if (r == c) diag += v;
    }
  }
  if (n == 0.0) return 0.0;
  const double po = diag / n;
  double pe = 0.0;
  for (std::size_t k = 0; k < L; ++k) pe += (rows[k] / n) * (cols[k] / n);
  if (pe == 1.0) return po == 1.0 ? 1.0 : 0.0;
  return (po - pe) / (1.0 - pe);
}

// Adjusted Rand index (Hubert-Arabie) of the partitions induced by a
// contingency table. Returns 1 when both partitions are trivial and identical.
inline double adjusted_rand_index(const std::vector<std::vector<std::size_t>>& table) {
  double n = 0.0, index = 0.0;
  std::vector<double> rows(table.size(), 0.0), cols;
  for (std::size_t r = 0; r < table.size(); ++r) {
    cols.resize(std::max(cols.size(), table[r].size()), 0.0);
    for (std::size_t c = 0; c < table[r].size(); ++c) {
      const double v = static_cast<double>(table[r][c]);
      n += v;
      rows[r] += v;
      cols[c] += v;
      index += detail::choose2(v);
    }
  }
  double sum_rows = 0.0, sum_cols = 0.0;
  for (double v : rows) sum_rows += detail::choose2(v);
  for (double v : cols) sum_cols += detail::choose2(v);
  const double total = detail::choose2(n);
  if (total == 0.0) return 1.0;
  const double expected = sum_rows * sum_cols / total;
  const double max_index = 0.5 * (sum_rows + sum_cols);
  if (max_index == expected) return 1.0;
  return (index - expected) / (max_index - expected);
}

// Compares two labelings over the same task ids.
inline ComparisonReport agreement_report(const std::map<std::string, std::string>& labels_a,
                                         const std::map<std::string, std::string>& labels_b,
                                         const LabelSet& label_set) {
  if (labels_a.size() != labels_b.size() ||
      !std::equal(labels_a.begin(), labels_a.end(), labels_b.begin(),
                  [](const auto& x, const auto& y) { return x.first == y.first; })) {
    throw Error(ErrorCode::KeyMismatch, "labelings cover different task sets (" + std::to_string(labels_a.size()) +
                                            " vs " + std::to_string(labels_b.size()) + " tasks)");
  }
  const std::size_t L = label_set.size();
  ComparisonReport r;
  r.n_tasks = labels_a.size();
  r.confusion.assign(L, std::vector<std::size_t>(L, 0));
  for (auto ia = labels_a.begin(), ib = labels_b.begin(); ia != labels_a.end(); ++ia, ++ib) {
    ++r.confusion[label_set.index_of(ia->second)][label_set.index_of(ib->second)];
  }
  std::size_t diag = 0;
  for (std::size_t k = 0; k < L; ++k) diag += r.confusion[k][k];
  r.accuracy = r.n_tasks == 0 ? 1.0 : static_cast<double>(diag) / static_cast<double>(r.n_tasks);
  r.percent_diff = 100.0 * (1.0 - r.accuracy);
  r.kappa = cohens_kappa(r.confusion);
  r.adjusted_rand = adjusted_rand_index(r.confusion);
  return r;
}

struct DifficultyProxy {
  std::map<std::string, std::size_t> counts;
  std::set<std::string> unsolved;  // counts for these are partial
};

// Accepted non-control contributions per task.
inline DifficultyProxy difficulty_proxy(const AggregationReport& report) {
  DifficultyProxy out;
  for (const auto& [id, t] : report.tasks) {
    out.counts.emplace(id, t.contribution_count);
    if (!t.label) out.unsolved.insert(id);
  }
  return out;
}

inline DifficultyProxy difficulty_proxy(const AggregationReport& report, const std::vector<std::string>& task_ids) {
  DifficultyProxy out;
  for (const auto& id : task_ids) {
    auto it = report.tasks.find(id);
    if (it == report.tasks.end()) throw Error(ErrorCode::UnknownTask, "task '" + id + "' is not in the report");
    out.counts.emplace(id, it->second.contribution_count);
    if (!it->second.label) out.unsolved.insert(id);
  }
  return out;
}

// Average ranks (1-based), ties sharing the mean rank.
inline std::vector<double> average_ranks(const std::vector<double>& v) {
  std::vector<std::size_t> order(v.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> ranks(v.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j + 1 < order.size() && v[order[j + 1]] == v[order[i]]) ++j;
    const double r = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = r;
    i = j + 1;
  }
  return ranks;
}

inline double pearson(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) throw Error(ErrorCode::BadParameters, "need two equal-length series");
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0) return 0.0;
  return sxy / std::sqrt(sxx * syy);
}

inline double spearman(const std::vector<double>& x, const std::vector<double>& y) {
  return pearson(average_ranks(x), average_ranks(y));
}

}  // namespace gwap

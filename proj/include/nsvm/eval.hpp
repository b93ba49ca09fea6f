#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include <boost/math/special_functions/beta.hpp>

#include "nsvm/dataset.hpp"
#include "nsvm/error.hpp"
#include "nsvm/matrix.hpp"

namespace nsvm {

inline double accuracy(std::span<const int> truth, std::span<const int> predicted) {
  if (truth.size() != predicted.size()) throw Error(ErrorKind::LengthMismatch, "accuracy: label vectors differ in length");
  if (truth.empty()) return 0.0;
  std::size_t hits = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) hits += truth[i] == predicted[i] ? 1 : 0;
  return static_cast<double>(hits) / static_cast<double>(truth.size());
}

/// counts[r][c] = #(true r+1, predicted c+1).
inline std::vector<std::vector<std::size_t>> confusion(std::span<const int> truth, std::span<const int> predicted, int k) {
  if (truth.size() != predicted.size()) throw Error(ErrorKind::LengthMismatch, "confusion: label vectors differ in length");
  std::vector<std::vector<std::size_t>> counts(static_cast<std::size_t>(k), std::vector<std::size_t>(static_cast<std::size_t>(k), 0));
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (truth[i] < 1 || truth[i] > k || predicted[i] < 1 || predicted[i] > k)
      throw Error(ErrorKind::BadLabel, "confusion: label outside 1..K");
    ++counts[static_cast<std::size_t>(truth[i] - 1)][static_cast<std::size_t>(predicted[i] - 1)];
  }
  return counts;
}

/// Maps standardized test rows to labels.
using Predictor = std::function<std::vector<int>(const Matrix&)>;
/// Fits on a standardized training split and returns its predictor.
using Trainer = std::function<Predictor(const Dataset&)>;

/// Named parameter values in axis declaration order.
struct ParamPoint {
  std::vector<std::pair<std::string, double>> values;

  double get(const std::string& name, double fallback) const {
    for (const auto& [k, v] : values)
      if (k == name) return v;
    return fallback;
  }

  friend bool operator==(const ParamPoint&, const ParamPoint&) = default;
};

struct CvReport {
  std::vector<double> fold_accuracies;
  std::vector<double> fold_seconds;
  std::vector<Vector> fold_train_means;  ///< standardizer means fitted on each training split
  double mean = 0.0;                     ///< AC
  double std = 0.0;                      ///< Std, sample standard deviation over folds
  ParamPoint params;
};

inline double sample_std(std::span<const double> v) {
  if (v.size() < 2) return 0.0;
  const double mu = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  double ss = 0.0;
  for (double x : v) ss += (x - mu) * (x - mu);
  return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

/// Stratified k-fold CV. The standardizer is fit on each training split only.
inline CvReport cross_validate(const Trainer& trainer, const Dataset& d, int k, std::uint64_t seed) {
  const FoldPlan plan = stratified_kfold(d, k, seed);
  CvReport report;
  for (std::size_t f = 0; f < plan.folds.size(); ++f) {
    const auto start = std::chrono::steady_clock::now();
    const Dataset train = subset(d, plan.training_indices(f));
    const Dataset test = subset(d, plan.folds[f]);
    const Standardizer s = fit_standardizer(train);
    std::vector<int> predicted;
    try {
      const Predictor predict = trainer(apply_standardizer(s, train));
      predicted = predict(s.apply(test.X));
    } catch (const Error& e) {
      throw Error(e.kind(), "fold " + std::to_string(f + 1) + ": " + e.message());
    }
    report.fold_accuracies.push_back(accuracy(test.y, predicted));
    report.fold_seconds.push_back(std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count());
    report.fold_train_means.push_back(s.mean);
  }
  const auto& acc = report.fold_accuracies;
  report.mean = std::accumulate(acc.begin(), acc.end(), 0.0) / static_cast<double>(acc.size());
  report.std = sample_std(acc);
  return report;
}

struct GridAxis {
  std::string name;
  std::vector<double> values;
};

struct GridSpec {
  std::vector<GridAxis> axes;

  /// Every combination, first axis varying slowest.
  std::vector<ParamPoint> cells() const {
    std::vector<ParamPoint> out{ParamPoint{}};
    for (const auto& axis : axes) {
      if (axis.values.empty()) throw Error(ErrorKind::BadParams, "grid axis '" + axis.name + "' is empty");
      std::vector<ParamPoint> next;
      for (const auto& p : out)
        for (double v : axis.values) {
          ParamPoint q = p;
          q.values.emplace_back(axis.name, v);
          next.push_back(std::move(q));
        }
      out = std::move(next);
    }
    return out;
  }
};

/// {2^lo, 2^(lo+step), …, 2^hi}.
inline std::vector<double> powers_of_two(int lo, int hi, int step = 1) {
  std::vector<double> v;
  for (int e = lo; e <= hi; e += step) v.push_back(std::ldexp(1.0, e));
  return v;
}

/// {2^-10, …, 2^10}.
inline std::vector<double> default_grid_values() { return powers_of_two(-10, 10); }

struct GridResult {
  ParamPoint best;
  CvReport report;
  std::vector<std::pair<ParamPoint, double>> cells;  ///< every cell with its mean accuracy
};

namespace detail {
inline bool lexicographically_less(const ParamPoint& a, const ParamPoint& b) {
  for (std::size_t i = 0; i < a.values.size() && i < b.values.size(); ++i) {
    if (a.values[i].second < b.values[i].second) return true;
    if (b.values[i].second < a.values[i].second) return false;
  }
  return a.values.size() < b.values.size();
}
}  // namespace detail

/// Cross-validates every cell; the best mean wins, ties go to the lexicographically
/// smallest parameter tuple.
inline GridResult grid_search(const std::function<Trainer(const ParamPoint&)>& factory, const Dataset& d,
                              const GridSpec& grid, int k, std::uint64_t seed) {
  const auto cells = grid.cells();
  GridResult result;
  bool have_best = false;
  for (const auto& cell : cells) {
    CvReport r = cross_validate(factory(cell), d, k, seed);
    r.params = cell;
    result.cells.emplace_back(cell, r.mean);
    const bool better = !have_best || r.mean > result.report.mean ||
                        (r.mean == result.report.mean && detail::lexicographically_less(cell, result.best));
    if (better) {
      result.best = cell;
      result.report = std::move(r);
      have_best = true;
    }
  }
  return result;
}

struct TTestResult {
  double t_statistic = 0.0;
  int degrees_freedom = 0;
  double p_value = 1.0;
};

/// Two-sided p-value of Student's t with df degrees of freedom: I_{df/(df+t²)}(df/2, 1/2).
inline double student_t_two_sided_p(double t, int df) {
  if (std::isinf(t)) return 0.0;
  const double nu = static_cast<double>(df);
  return boost::math::ibeta(0.5 * nu, 0.5, nu / (nu + t * t));
}

/// Paired t-test on per-fold accuracies.
inline TTestResult paired_ttest(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw Error(ErrorKind::LengthMismatch, "paired_ttest: samples differ in length");
  if (a.size() < 2) throw Error(ErrorKind::TooFewFolds, "paired_ttest: need at least two pairs");
  const std::size_t k = a.size();
  Vector diff(k);
  for (std::size_t i = 0; i < k; ++i) diff[i] = a[i] - b[i];
  const double mu = std::accumulate(diff.begin(), diff.end(), 0.0) / static_cast<double>(k);
  const double sd = sample_std(diff);
  TTestResult r;
  r.degrees_freedom = static_cast<int>(k) - 1;
  if (sd == 0.0) {
    if (mu == 0.0) return {0.0, r.degrees_freedom, 1.0};
    r.t_statistic = mu > 0 ? INFINITY : -INFINITY;
    r.p_value = 0.0;
    return r;
  }
  r.t_statistic = mu / (sd / std::sqrt(static_cast<double>(k)));
  r.p_value = student_t_two_sided_p(r.t_statistic, r.degrees_freedom);
  return r;
}

}  // namespace nsvm

#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <numeric>
#include <optional>
#include <ostream>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "nsvm/error.hpp"
#include "nsvm/matrix.hpp"

namespace nsvm {

/// Samples as rows of X, labels encoded 1..K. label_names[k-1] is the
/// original token of encoded label k.
struct Dataset {
  Matrix X;
  std::vector<int> y;
  int K = 0;
  std::vector<std::string> label_names;

  std::size_t size() const noexcept { return X.rows(); }
  std::size_t features() const noexcept { return X.cols(); }

  std::vector<std::size_t> class_counts() const {
    std::vector<std::size_t> counts(static_cast<std::size_t>(K), 0);
    for (int label : y) ++counts[static_cast<std::size_t>(label - 1)];
    return counts;
  }
};

namespace detail {

inline std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

inline std::optional<double> parse_double(std::string_view s) {
  s = trim(s);
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  if (s.empty()) return std::nullopt;
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(v)) return std::nullopt;
  return v;
}

inline std::vector<std::string_view> split(std::string_view line, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(sep, start);
    out.push_back(line.substr(start, pos == std::string_view::npos ? pos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

/// Orders tokens numerically when every token parses as a number, otherwise lexicographically.
inline std::vector<std::string> sorted_label_tokens(const std::vector<std::string>& tokens) {
  std::set<std::string> distinct(tokens.begin(), tokens.end());
  std::vector<std::string> names(distinct.begin(), distinct.end());
  const bool numeric = std::all_of(names.begin(), names.end(),
                                   [](const std::string& t) { return parse_double(t).has_value(); });
  if (numeric) {
    std::stable_sort(names.begin(), names.end(), [](const std::string& a, const std::string& b) {
      return *parse_double(a) < *parse_double(b);
    });
  }
  return names;
}

inline Dataset encode(Matrix x, const std::vector<std::string>& tokens) {
  Dataset d;
  d.label_names = sorted_label_tokens(tokens);
  d.K = static_cast<int>(d.label_names.size());
  if (d.K < 2) throw Error(ErrorKind::TooFewClasses, "found " + std::to_string(d.K) + " distinct label(s)");
  std::map<std::string, int> code;
  for (int k = 0; k < d.K; ++k) code[d.label_names[static_cast<std::size_t>(k)]] = k + 1;
  d.y.reserve(tokens.size());
  for (const auto& t : tokens) d.y.push_back(code.at(t));
  d.X = std::move(x);
  return d;
}

inline std::ifstream open_input(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::IoError, "cannot open " + path);
  return in;
}

}  // namespace detail

/// Builds a dataset from already-encoded labels (1..K, every class present).
inline Dataset make_dataset(Matrix x, std::vector<int> y, int k) {
  if (x.rows() != y.size()) throw Error(ErrorKind::LengthMismatch, "make_dataset: label count differs from row count");
  if (k < 2) throw Error(ErrorKind::TooFewClasses, "make_dataset: K < 2");
  Dataset d{std::move(x), std::move(y), k, {}};
  for (int label : d.y)
    if (label < 1 || label > k) throw Error(ErrorKind::BadLabel, "label " + std::to_string(label) + " outside 1..K");
  for (auto c : d.class_counts())
    if (c == 0) throw Error(ErrorKind::EmptyClass, "make_dataset: a class has no samples");
  for (double v : d.X.data())
    if (!std::isfinite(v)) throw Error(ErrorKind::BadParams, "make_dataset: non-finite feature");
  for (int i = 1; i <= k; ++i) d.label_names.push_back(std::to_string(i));
  return d;
}

/// Rows of n numeric fields followed by one label token.
inline Dataset parse_csv(std::istream& in, bool has_header) {
  std::string line;
  std::size_t row_no = 0;
  std::size_t n = 0;
  std::vector<double> values;
  std::vector<std::string> tokens;
  bool header_pending = has_header;
  while (std::getline(in, line)) {
    ++row_no;
    const auto trimmed = detail::trim(line);
    if (trimmed.empty()) continue;
    if (header_pending) {
      header_pending = false;
      continue;
    }
    const auto fields = detail::split(trimmed, ',');
    if (fields.size() < 2) {
      throw Error(ErrorKind::ParseError, "row " + std::to_string(row_no) + ": need at least one feature and a label");
    }
    if (tokens.empty()) {
      n = fields.size() - 1;
    } else if (fields.size() - 1 != n) {
      throw Error(ErrorKind::ParseError, "row " + std::to_string(row_no) + ": expected " + std::to_string(n + 1) +
                                             " fields, found " + std::to_string(fields.size()));
    }
    for (std::size_t j = 0; j < n; ++j) {
      const auto v = detail::parse_double(fields[j]);
      if (!v) {
        throw Error(ErrorKind::ParseError,
                    "row " + std::to_string(row_no) + " col " + std::to_string(j + 1) + ": not a number");
      }
      values.push_back(*v);
    }
    const auto label = detail::trim(fields[n]);
    if (label.empty()) throw Error(ErrorKind::ParseError, "row " + std::to_string(row_no) + ": empty label");
    tokens.emplace_back(label);
  }
  if (tokens.empty()) throw Error(ErrorKind::ParseError, "no data rows");
  Matrix x(tokens.size(), n);
  std::copy(values.begin(), values.end(), x.data().begin());
  return detail::encode(std::move(x), tokens);
}

/// Writes rows in the format parse_csv reads: shortest round-trip reals, then the label token.
inline void write_csv(std::ostream& out, const Dataset& d) {
  char buf[64];
  for (std::size_t i = 0; i < d.size(); ++i) {
    for (double v : d.X.row(i)) {
      const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
      if (ec != std::errc()) throw Error(ErrorKind::IoError, "cannot format real");
      out.write(buf, ptr - buf);
      out << ',';
    }
    out << d.label_names[static_cast<std::size_t>(d.y[i] - 1)] << '\n';
  }
}

inline Dataset load_csv(const std::string& path, bool has_header) {
  auto in = detail::open_input(path);
  return parse_csv(in, has_header);
}

/// "label idx:val ..." lines with 1-based indices; absent indices are zero.
inline Dataset parse_libsvm(std::istream& in) {
  std::string line;
  std::size_t row_no = 0;
  std::vector<std::vector<std::pair<std::size_t, double>>> rows;
  std::vector<std::string> tokens;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++row_no;
    const auto hash = line.find('#');
    std::istringstream ls(line.substr(0, hash));
    std::string label;
    if (!(ls >> label)) continue;
    std::vector<std::pair<std::size_t, double>> entries;
    std::set<std::size_t> seen;
    std::string item;
    while (ls >> item) {
      const auto colon = item.find(':');
      std::size_t idx = 0;
      const auto idx_str = std::string_view(item).substr(0, colon);
      const auto [p, ec] = std::from_chars(idx_str.data(), idx_str.data() + idx_str.size(), idx);
      const auto val = colon == std::string::npos ? std::nullopt
                                                  : detail::parse_double(std::string_view(item).substr(colon + 1));
      if (colon == std::string::npos || ec != std::errc() || p != idx_str.data() + idx_str.size() || idx == 0 || !val) {
        throw Error(ErrorKind::ParseError, "row " + std::to_string(row_no) + ": bad entry '" + item + "'");
      }
      if (!seen.insert(idx).second) {
        throw Error(ErrorKind::ParseError, "row " + std::to_string(row_no) + ": duplicate index " + std::to_string(idx));
      }
      n = std::max(n, idx);
      entries.emplace_back(idx - 1, *val);
    }
    rows.push_back(std::move(entries));
    tokens.push_back(label);
  }
  if (tokens.empty()) throw Error(ErrorKind::ParseError, "no data rows");
  Matrix x(rows.size(), n);
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (const auto& [j, v] : rows[i]) x(i, j) = v;
  return detail::encode(std::move(x), tokens);
}

inline Dataset load_libsvm(const std::string& path) {
  auto in = detail::open_input(path);
  return parse_libsvm(in);
}

/// Per-feature centering and population-std scaling; zero-variance features keep scale 1.
struct Standardizer {
  Vector mean;
  Vector scale;

  static Standardizer identity(std::size_t n) { return {Vector(n, 0.0), Vector(n, 1.0)}; }

  Matrix apply(const Matrix& x) const {
    if (x.cols() != mean.size()) throw Error(ErrorKind::DimensionMismatch, "standardizer: feature count mismatch");
    Matrix out = x;
    for (std::size_t i = 0; i < out.rows(); ++i) {
      auto r = out.row(i);
      for (std::size_t j = 0; j < r.size(); ++j) r[j] = (r[j] - mean[j]) / scale[j];
    }
    return out;
  }

  friend bool operator==(const Standardizer&, const Standardizer&) = default;
};

inline Standardizer fit_standardizer(const Matrix& x) {
  const std::size_t m = x.rows();
  const std::size_t n = x.cols();
  if (m == 0) throw Error(ErrorKind::BadParams, "fit_standardizer: empty data");
  Standardizer s{Vector(n, 0.0), Vector(n, 1.0)};
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) s.mean[j] += x(i, j);
  for (double& v : s.mean) v /= static_cast<double>(m);
  for (std::size_t j = 0; j < n; ++j) {
    double ss = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
      const double d = x(i, j) - s.mean[j];
      ss += d * d;
    }
    const double sd = std::sqrt(ss / static_cast<double>(m));
    s.scale[j] = sd > 1e-12 * std::max(1.0, std::abs(s.mean[j])) ? sd : 1.0;
  }
  return s;
}

inline Standardizer fit_standardizer(const Dataset& d) { return fit_standardizer(d.X); }

inline Matrix apply_standardizer(const Standardizer& s, const Matrix& x) { return s.apply(x); }

inline Dataset apply_standardizer(const Standardizer& s, const Dataset& d) {
  Dataset out = d;
  out.X = s.apply(d.X);
  return out;
}

inline Dataset subset(const Dataset& d, std::span<const std::size_t> idx) {
  Dataset out;
  out.X = select_rows(d.X, idx);
  out.y.reserve(idx.size());
  for (auto i : idx) out.y.push_back(d.y[i]);
  out.K = d.K;
  out.label_names = d.label_names;
  return out;
}

struct FoldPlan {
  std::vector<std::vector<std::size_t>> folds;
  std::uint64_t seed = 0;

  /// Indices of every fold except `held_out`, ascending.
  std::vector<std::size_t> training_indices(std::size_t held_out) const {
    std::vector<std::size_t> idx;
    for (std::size_t f = 0; f < folds.size(); ++f)
      if (f != held_out) idx.insert(idx.end(), folds[f].begin(), folds[f].end());
    std::sort(idx.begin(), idx.end());
    return idx;
  }
};

/// Shuffles each class with the seeded generator and deals it round-robin.
/// Dealing continues where the previous class stopped so fold sizes stay balanced.
inline FoldPlan stratified_kfold(const Dataset& d, int k, std::uint64_t seed) {
  const std::size_t m = d.size();
  if (k < 2 || static_cast<std::size_t>(k) > m) {
    throw Error(ErrorKind::BadFoldCount, "fold count " + std::to_string(k) + " outside [2, " + std::to_string(m) + "]");
  }
  std::mt19937_64 rng(seed);
  FoldPlan plan{std::vector<std::vector<std::size_t>>(static_cast<std::size_t>(k)), seed};
  std::size_t next = 0;
  for (int c = 1; c <= d.K; ++c) {
    std::vector<std::size_t> members;
    for (std::size_t i = 0; i < m; ++i)
      if (d.y[i] == c) members.push_back(i);
    std::shuffle(members.begin(), members.end(), rng);
    for (auto i : members) {
      plan.folds[next].push_back(i);
      next = (next + 1) % static_cast<std::size_t>(k);
    }
  }
  for (auto& f : plan.folds) std::sort(f.begin(), f.end());
  return plan;
}

/// Four noisy lines in the plane: x₂=x₁, x₂=−x₁, x₂=x₁+2, x₂=−x₁−2, with x₁ ~ U[−2,2],
/// Gaussian noise perpendicular to each line, and the first ⌊outlier_frac·per_class⌋
/// samples of each class redrawn uniformly on [−3,3]².
inline Dataset gen_cross_planes(int per_class, double noise_sd, double outlier_frac, std::uint64_t seed) {
  if (per_class < 2 || !(noise_sd >= 0.0) || !(outlier_frac >= 0.0) || !(outlier_frac < 0.5)) {
    throw Error(ErrorKind::BadParams, "gen_cross_planes: need per_class >= 2, noise >= 0, 0 <= outliers < 0.5");
  }
  struct Line {
    double slope;
    double offset;
  };
  constexpr Line lines[4] = {{1.0, 0.0}, {-1.0, 0.0}, {1.0, 2.0}, {-1.0, -2.0}};
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> along(-2.0, 2.0);
  std::uniform_real_distribution<double> box(-3.0, 3.0);
  std::normal_distribution<double> noise(0.0, 1.0);

  const auto pc = static_cast<std::size_t>(per_class);
  const auto outliers = static_cast<std::size_t>(std::floor(outlier_frac * per_class));
  Matrix x(4 * pc, 2);
  std::vector<int> y(4 * pc);
  for (std::size_t c = 0; c < 4; ++c) {
    const auto [slope, offset] = lines[c];
    const double inv = 1.0 / std::sqrt(1.0 + slope * slope);
    for (std::size_t s = 0; s < pc; ++s) {
      const std::size_t i = c * pc + s;
      const double x1 = along(rng);
      const double e = noise_sd > 0.0 ? noise_sd * noise(rng) : 0.0;
      x(i, 0) = x1 - slope * inv * e;
      x(i, 1) = slope * x1 + offset + inv * e;
      if (s < outliers) {
        x(i, 0) = box(rng);
        x(i, 1) = box(rng);
      }
      y[i] = static_cast<int>(c) + 1;
    }
  }
  return make_dataset(std::move(x), std::move(y), 4);
}

/// Class 1 = {(1,1), (−1,−1)}, class 2 = {(1,−1), (−1,1)}.
inline Dataset gen_xor() {
  Matrix x{{1.0, 1.0}, {-1.0, -1.0}, {1.0, -1.0}, {-1.0, 1.0}};
  return make_dataset(std::move(x), {1, 1, 2, 2}, 2);
}

}  // namespace nsvm

#pragma once

// Self-describing text files for trained models and CV reports.
//
// Model file, one record per line:
//   nsvm-model <format_version>
//   algorithm <nsvm-linear|nsvm-kernel|gepsvm|lstsvm|pcc>
//   classes <K>
//   features <n>
//   label <original token>                      (K lines, in encoded order)
//   standardizer.mean <n reals>
//   standardizer.scale <n reals>
//   ... algorithm payload (see write_payload) ...
//   end
// Reals use the shortest round-trip decimal form, so load(save(m)) predicts bit-exactly.

#include <charconv>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <variant>
#include <vector>

#include "nsvm/baselines.hpp"
#include "nsvm/dataset.hpp"
#include "nsvm/error.hpp"
#include "nsvm/eval.hpp"
#include "nsvm/kernel.hpp"
#include "nsvm/mpdcae.hpp"
#include "nsvm/nsvm_kernel.hpp"
#include "nsvm/nsvm_linear.hpp"

namespace nsvm {

inline constexpr int kModelFormatVersion = 1;
inline constexpr int kReportFormatVersion = 1;

struct TrainedModel {
  std::variant<LinearNsvmModel, KernelNsvmModel, PlaneModel> payload;
  std::vector<std::string> label_names;

  std::string algorithm() const {
    if (std::holds_alternative<LinearNsvmModel>(payload)) return "nsvm-linear";
    if (std::holds_alternative<KernelNsvmModel>(payload)) return "nsvm-kernel";
    return to_string(std::get<PlaneModel>(payload).algorithm);
  }

  int K() const {
    return std::visit([](const auto& m) { return m.K(); }, payload);
  }
  std::size_t n() const {
    return std::visit([](const auto& m) { return m.n(); }, payload);
  }
  const Standardizer& standardizer() const {
    return std::visit([](const auto& m) -> const Standardizer& { return m.standardizer; }, payload);
  }
  void set_standardizer(Standardizer s) {
    std::visit([&](auto& m) { m.standardizer = std::move(s); }, payload);
  }
};

/// Labels 1..K for rows of x in raw feature space.
inline std::vector<int> predict(const TrainedModel& model, const Matrix& x) {
  return std::visit(
      [&](const auto& m) -> std::vector<int> {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, LinearNsvmModel>) return predict_linear(m, x);
        else if constexpr (std::is_same_v<T, KernelNsvmModel>) return predict_kernel(m, x);
        else return predict_planes(m, x);
      },
      model.payload);
}

namespace detail {

inline std::string format_real(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  if (ec != std::errc()) throw Error(ErrorKind::IoError, "cannot format real");
  return std::string(buf, ptr);
}

inline std::string join_reals(std::span<const double> v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) s += ' ';
    s += format_real(v[i]);
  }
  return s;
}

inline void write_rows(std::ostream& out, const std::string& key, const Matrix& m) {
  out << key << ' ' << m.rows() << ' ' << m.cols() << '\n';
  for (std::size_t i = 0; i < m.rows(); ++i) out << join_reals(m.row(i)) << '\n';
}

inline void write_weights(std::ostream& out, const std::string& key, const StackedWeights& w) {
  out << key << ' ' << w.K << ' ' << w.block_dim << '\n';
  for (int y = 1; y <= w.K; ++y) out << join_reals(w.block(y)) << '\n';
}

inline void write_flags(std::ostream& out, const std::vector<bool>& flags) {
  out << "degenerate";
  for (bool f : flags) out << ' ' << (f ? 1 : 0);
  out << '\n';
}

inline std::string to_string(UpdateRule r) { return r == UpdateRule::Stationarity ? "stationarity" : "printed"; }
inline std::string to_string(DescentGuard g) { return g == DescentGuard::AdaptiveL ? "adaptive-L" : "none"; }

inline void write_config(std::ostream& out, const NsvmConfig& c) {
  out << "config.C1 " << format_real(c.C1) << '\n'
      << "config.C2 " << format_real(c.C2) << '\n'
      << "config.L " << format_real(c.L) << '\n'
      << "config.max_iter " << c.max_iter << '\n'
      << "config.tol " << format_real(c.tol) << '\n'
      << "config.restart " << c.restart_period << '\n'
      << "config.seed " << c.seed << '\n'
      << "config.update " << to_string(c.update) << '\n'
      << "config.guard " << to_string(c.guard) << '\n';
}

/// Line reader with keyed access and precise error reporting.
class Reader {
 public:
  explicit Reader(std::istream& in) : in_(in) {}

  std::string next_line() {
    std::string line;
    while (std::getline(in_, line)) {
      ++line_no_;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (!line.empty()) return line;
    }
    fail("unexpected end of file");
  }

  /// Reads a line that must start with `key`; returns the remainder.
  std::string expect(std::string_view key) {
    const std::string line = next_line();
    if (line.rfind(key, 0) != 0 || (line.size() > key.size() && line[key.size()] != ' ')) {
      fail("expected '" + std::string(key) + "', found '" + line + "'");
    }
    return line.size() > key.size() ? line.substr(key.size() + 1) : std::string();
  }

  std::vector<double> reals(const std::string& text, std::size_t expected) {
    std::vector<double> v;
    std::istringstream ss(text);
    std::string tok;
    while (ss >> tok) {
      double x = 0.0;
      const auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), x);
      if (ec != std::errc() || ptr != tok.data() + tok.size()) fail("bad real '" + tok + "'");
      v.push_back(x);
    }
    if (v.size() != expected) fail("expected " + std::to_string(expected) + " values, found " + std::to_string(v.size()));
    return v;
  }

  long long integer(const std::string& text) {
    long long v = 0;
    const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (ec != std::errc() || ptr != text.data() + text.size()) fail("bad integer '" + text + "'");
    return v;
  }

  double real(const std::string& text) { return reals(text, 1).front(); }

  Matrix rows(std::string_view key) {
    const auto dims = split_ints(expect(key), 2);
    Matrix m(static_cast<std::size_t>(dims[0]), static_cast<std::size_t>(dims[1]));
    for (std::size_t i = 0; i < m.rows(); ++i) {
      const auto v = reals(next_line(), m.cols());
      std::copy(v.begin(), v.end(), m.row(i).begin());
    }
    return m;
  }

  /// Reads K blocks of `dim` reals after a "key K dim" header that must match.
  StackedWeights weights(std::string_view key, long long k, std::size_t dim) {
    const auto dims = split_ints(expect(key), 2);
    if (dims[0] != k || dims[1] != static_cast<long long>(dim)) fail("weight block shape does not match header");
    StackedWeights w(static_cast<int>(dims[0]), static_cast<std::size_t>(dims[1]));
    for (int y = 1; y <= w.K; ++y) {
      const auto v = reals(next_line(), w.block_dim);
      std::copy(v.begin(), v.end(), w.block(y).begin());
    }
    return w;
  }

  std::vector<bool> flags(std::size_t k) {
    const auto v = split_ints(expect("degenerate"), k);
    std::vector<bool> out;
    for (auto x : v) out.push_back(x != 0);
    return out;
  }

  NsvmConfig config() {
    NsvmConfig c;
    c.C1 = real(expect("config.C1"));
    c.C2 = real(expect("config.C2"));
    c.L = real(expect("config.L"));
    c.max_iter = static_cast<int>(integer(expect("config.max_iter")));
    c.tol = real(expect("config.tol"));
    c.restart_period = static_cast<int>(integer(expect("config.restart")));
    c.seed = static_cast<std::uint64_t>(integer(expect("config.seed")));
    const auto update = expect("config.update");
    if (update != "stationarity" && update != "printed") fail("unknown update rule '" + update + "'");
    c.update = update == "printed" ? UpdateRule::Printed : UpdateRule::Stationarity;
    const auto guard = expect("config.guard");
    if (guard != "adaptive-L" && guard != "none") fail("unknown guard '" + guard + "'");
    c.guard = guard == "none" ? DescentGuard::None : DescentGuard::AdaptiveL;
    return c;
  }

  [[noreturn]] void fail(const std::string& what) const {
    throw Error(ErrorKind::ParseError, "model file line " + std::to_string(line_no_) + ": " + what);
  }

 private:
  std::vector<long long> split_ints(const std::string& text, std::size_t expected) {
    std::vector<long long> v;
    std::istringstream ss(text);
    std::string tok;
    while (ss >> tok) v.push_back(integer(tok));
    if (v.size() != expected) fail("expected " + std::to_string(expected) + " integers");
    return v;
  }

  std::istream& in_;
  std::size_t line_no_ = 0;
};

/// Writes via a temporary file and renames it into place.
template <typename Fn>
void write_atomically(const std::string& path, Fn&& body) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::trunc);
    if (!out) throw Error(ErrorKind::IoError, "cannot write " + path);
    body(out);
    out.flush();
    if (!out) throw Error(ErrorKind::IoError, "write failed for " + path);
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp, ec);
    throw Error(ErrorKind::IoError, "cannot move model into " + path);
  }
}

}  // namespace detail

inline void write_model(std::ostream& out, const TrainedModel& model) {
  using detail::format_real;
  out << "nsvm-model " << kModelFormatVersion << '\n';
  out << "algorithm " << model.algorithm() << '\n';
  out << "classes " << model.K() << '\n';
  out << "features " << model.n() << '\n';
  for (const auto& name : model.label_names) out << "label " << name << '\n';
  out << "standardizer.mean " << detail::join_reals(model.standardizer().mean) << '\n';
  out << "standardizer.scale " << detail::join_reals(model.standardizer().scale) << '\n';
  std::visit(
      [&](const auto& m) {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, LinearNsvmModel>) {
          detail::write_config(out, m.config);
          detail::write_flags(out, m.degenerate);
          detail::write_weights(out, "weights", m.weights);
        } else if constexpr (std::is_same_v<T, KernelNsvmModel>) {
          detail::write_config(out, m.config);
          out << "kernel " << to_string(m.kernel.kind) << ' ' << format_real(m.kernel.sigma) << '\n';
          out << "gram_ridge " << format_real(m.gram_ridge) << '\n';
          out << "rule " << (m.rule == KernelRule::NormConsistent ? "norm-consistent" : "printed") << '\n';
          detail::write_flags(out, m.degenerate);
          detail::write_rows(out, "train_X", m.train_X);
          detail::write_weights(out, "alpha", m.alpha);
        } else {
          out << "rule " << (m.rule == DistanceRule::NormalizedByW ? "normalized" : "absolute") << '\n';
          out << "params.delta " << format_real(m.params.delta) << '\n';
          out << "params.lambda " << format_real(m.params.lambda) << '\n';
          out << "params.nu " << format_real(m.params.nu) << '\n';
          detail::write_weights(out, "planes", m.planes);
        }
      },
      model.payload);
  out << "end\n";
}

inline TrainedModel read_model(std::istream& in) {
  detail::Reader r(in);
  const auto version = r.integer(r.expect("nsvm-model"));
  if (version != kModelFormatVersion) r.fail("unsupported format_version " + std::to_string(version));
  const std::string algo = r.expect("algorithm");
  const auto k = r.integer(r.expect("classes"));
  const auto n = r.integer(r.expect("features"));
  if (k < 2 || n < 1) r.fail("bad class or feature count");
  TrainedModel model;
  for (long long i = 0; i < k; ++i) model.label_names.push_back(r.expect("label"));
  Standardizer s;
  s.mean = r.reals(r.expect("standardizer.mean"), static_cast<std::size_t>(n));
  s.scale = r.reals(r.expect("standardizer.scale"), static_cast<std::size_t>(n));
  if (algo == "nsvm-linear") {
    LinearNsvmModel m;
    m.config = r.config();
    m.degenerate = r.flags(static_cast<std::size_t>(k));
    m.weights = r.weights("weights", k, static_cast<std::size_t>(n) + 1);
    m.standardizer = std::move(s);
    model.payload = std::move(m);
  } else if (algo == "nsvm-kernel") {
    KernelNsvmModel m;
    m.config = r.config();
    std::istringstream ks(r.expect("kernel"));
    std::string kind;
    std::string sigma;
    ks >> kind >> sigma;
    if (kind != "linear" && kind != "rbf") r.fail("unknown kernel '" + kind + "'");
    m.kernel = {kind == "linear" ? KernelKind::Linear : KernelKind::Rbf, r.real(sigma)};
    m.gram_ridge = r.real(r.expect("gram_ridge"));
    const auto rule = r.expect("rule");
    if (rule != "norm-consistent" && rule != "printed") r.fail("unknown kernel rule '" + rule + "'");
    m.rule = rule == "printed" ? KernelRule::Printed : KernelRule::NormConsistent;
    m.degenerate = r.flags(static_cast<std::size_t>(k));
    m.train_X = r.rows("train_X");
    if (m.train_X.cols() != static_cast<std::size_t>(n)) r.fail("train_X width does not match header");
    m.alpha = r.weights("alpha", k, m.train_X.rows());
    m.standardizer = std::move(s);
    model.payload = std::move(m);
  } else if (algo == "gepsvm" || algo == "lstsvm" || algo == "pcc") {
    PlaneModel m;
    m.algorithm = algo == "gepsvm" ? PlaneAlgorithm::Gepsvm : algo == "lstsvm" ? PlaneAlgorithm::Lstsvm : PlaneAlgorithm::Pcc;
    const auto rule = r.expect("rule");
    if (rule != "normalized" && rule != "absolute") r.fail("unknown distance rule '" + rule + "'");
    m.rule = rule == "normalized" ? DistanceRule::NormalizedByW : DistanceRule::Absolute;
    m.params.delta = r.real(r.expect("params.delta"));
    m.params.lambda = r.real(r.expect("params.lambda"));
    m.params.nu = r.real(r.expect("params.nu"));
    m.planes = r.weights("planes", k, static_cast<std::size_t>(n) + 1);
    m.standardizer = std::move(s);
    model.payload = std::move(m);
  } else {
    r.fail("unknown algorithm '" + algo + "'");
  }
  r.expect("end");
  return model;
}

inline void save_model(const std::string& path, const TrainedModel& model) {
  detail::write_atomically(path, [&](std::ostream& out) { write_model(out, model); });
}

inline TrainedModel load_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::IoError, "cannot open model " + path);
  return read_model(in);
}

/// CV report. Lines starting with "time." carry wall-clock data; everything else
/// is a deterministic function of the inputs and flags.
struct ReportContext {
  std::string algorithm;
  std::string data;
  int folds = 10;
  std::uint64_t seed = 0;
  std::string grid;
};

inline std::string format_params(const ParamPoint& p) {
  std::string s;
  for (std::size_t i = 0; i < p.values.size(); ++i) {
    if (i) s += ' ';
    s += p.values[i].first + '=' + detail::format_real(p.values[i].second);
  }
  return s.empty() ? "-" : s;
}

inline void write_report(std::ostream& out, const ReportContext& ctx, const GridResult& result, double total_seconds) {
  using detail::format_real;
  out << "nsvm-report " << kReportFormatVersion << '\n';
  out << "algorithm " << ctx.algorithm << '\n';
  out << "data " << ctx.data << '\n';
  out << "folds " << ctx.folds << '\n';
  out << "seed " << ctx.seed << '\n';
  out << "grid " << ctx.grid << '\n';
  out << "cells " << result.cells.size() << '\n';
  for (const auto& [p, mean] : result.cells) out << "cell " << format_params(p) << " mean " << format_real(mean) << '\n';
  out << "best " << format_params(result.best) << '\n';
  const auto& rep = result.report;
  for (std::size_t f = 0; f < rep.fold_accuracies.size(); ++f)
    out << "fold " << f + 1 << " accuracy " << format_real(rep.fold_accuracies[f]) << '\n';
  out << "AC " << format_real(rep.mean) << '\n';
  out << "Std " << format_real(rep.std) << '\n';
  for (std::size_t f = 0; f < rep.fold_seconds.size(); ++f)
    out << "time.fold " << f + 1 << ' ' << format_real(rep.fold_seconds[f]) << '\n';
  out << "time.total " << format_real(total_seconds) << '\n';
  out << "end\n";
}

inline void save_report(const std::string& path, const ReportContext& ctx, const GridResult& result, double total_seconds) {
  detail::write_atomically(path, [&](std::ostream& out) { write_report(out, ctx, result, total_seconds); });
}

}  // namespace nsvm

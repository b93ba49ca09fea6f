#pragma once

// Algorithm selection, hyperparameter grids and end-to-end fitting shared by the CLI,
// the samples and the acceptance harness.

#include <cmath>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "nsvm/baselines.hpp"
#include "nsvm/dataset.hpp"
#include "nsvm/error.hpp"
#include "nsvm/eval.hpp"
#include "nsvm/kernel.hpp"
#include "nsvm/model_io.hpp"
#include "nsvm/mpdcae.hpp"
#include "nsvm/nsvm_kernel.hpp"
#include "nsvm/nsvm_linear.hpp"

namespace nsvm {

enum class Algorithm { Nsvm, NsvmKernel, Gepsvm, Lstsvm, Pcc };

inline std::string to_string(Algorithm a) {
  switch (a) {
    case Algorithm::Nsvm: return "nsvm";
    case Algorithm::NsvmKernel: return "nsvm-kernel";
    case Algorithm::Gepsvm: return "gepsvm";
    case Algorithm::Lstsvm: return "lstsvm";
    case Algorithm::Pcc: return "pcc";
  }
  return "?";
}

inline Algorithm parse_algorithm(std::string_view s) {
  for (Algorithm a : {Algorithm::Nsvm, Algorithm::NsvmKernel, Algorithm::Gepsvm, Algorithm::Lstsvm, Algorithm::Pcc})
    if (s == to_string(a)) return a;
  throw Error(ErrorKind::BadParams, "unknown algorithm '" + std::string(s) + "'");
}

/// Everything needed to fit one model; grid cells override individual fields by name.
struct ModelParams {
  Algorithm algorithm = Algorithm::Nsvm;
  NsvmConfig config;
  KernelSpec kernel;
  PlaneParams plane;
};

inline double* param_slot(ModelParams& p, std::string_view name) {
  if (name == "C1") return &p.config.C1;
  if (name == "C2") return &p.config.C2;
  if (name == "sigma") return &p.kernel.sigma;
  if (name == "delta") return &p.plane.delta;
  if (name == "lambda") return &p.plane.lambda;
  if (name == "nu") return &p.plane.nu;
  throw Error(ErrorKind::BadParams, "unknown grid parameter '" + std::string(name) + "'");
}

/// Recognised names: C1, C2, sigma, delta, lambda, nu.
inline ModelParams with_point(ModelParams p, const ParamPoint& point) {
  for (const auto& [name, v] : point.values) *param_slot(p, name) = v;
  return p;
}

/// Every tuned parameter of the algorithm over {2^-10, …, 2^10}.
inline GridSpec default_grid(Algorithm a) {
  const auto v = default_grid_values();
  switch (a) {
    case Algorithm::Nsvm: return {{{"C1", v}, {"C2", v}}};
    case Algorithm::NsvmKernel: return {{{"C1", v}, {"C2", v}, {"sigma", v}}};
    case Algorithm::Gepsvm: return {{{"delta", v}}};
    case Algorithm::Lstsvm: return {{{"lambda", v}, {"delta", v}}};
    case Algorithm::Pcc: return {{{"nu", v}}};
  }
  return {};
}

namespace detail {
inline double parse_grid_value(std::string_view tok) {
  const std::string_view t = trim(tok);
  if (t.starts_with("2^")) {
    const auto e = parse_double(t.substr(2));
    if (!e || *e != std::floor(*e)) throw Error(ErrorKind::BadParams, "bad grid exponent '" + std::string(t) + "'");
    return std::ldexp(1.0, static_cast<int>(*e));
  }
  const auto v = parse_double(t);
  if (!v) throw Error(ErrorKind::BadParams, "bad grid value '" + std::string(t) + "'");
  return *v;
}
}  // namespace detail

/// Parses "name=v,v,...;name=lo:hi" where values are reals or 2^k and lo:hi expands to
/// {2^lo, …, 2^hi}. Axis order is kept.
inline GridSpec parse_grid(std::string_view text) {
  GridSpec g;
  for (auto axis_text : detail::split(text, ';')) {
    axis_text = detail::trim(axis_text);
    if (axis_text.empty()) continue;
    const auto eq = axis_text.find('=');
    if (eq == std::string_view::npos) throw Error(ErrorKind::BadParams, "grid axis needs name=values");
    GridAxis axis{std::string(detail::trim(axis_text.substr(0, eq))), {}};
    const auto values = axis_text.substr(eq + 1);
    if (const auto colon = values.find(':'); colon != std::string_view::npos) {
      const auto lo = detail::parse_double(detail::trim(values.substr(0, colon)));
      const auto hi = detail::parse_double(detail::trim(values.substr(colon + 1)));
      if (!lo || !hi || *lo != std::floor(*lo) || *hi != std::floor(*hi) || *lo > *hi)
        throw Error(ErrorKind::BadParams, "bad grid range for '" + axis.name + "'");
      axis.values = powers_of_two(static_cast<int>(*lo), static_cast<int>(*hi));
    } else {
      for (auto tok : detail::split(values, ',')) axis.values.push_back(detail::parse_grid_value(tok));
    }
    ModelParams probe;
    param_slot(probe, axis.name);
    g.axes.push_back(std::move(axis));
  }
  if (g.axes.empty()) throw Error(ErrorKind::BadParams, "grid spec is empty");
  return g;
}

struct FitResult {
  TrainedModel model;
  std::optional<SolverTrace> trace;  ///< NSVM solvers only
};

/// Trains on `d` exactly as given; the model carries an identity standardizer.
inline FitResult fit_as_given(const ModelParams& p, const Dataset& d) {
  FitResult r;
  switch (p.algorithm) {
    case Algorithm::Nsvm: {
      auto t = train_linear(d, p.config);
      r.model.payload = std::move(t.model);
      r.trace = std::move(t.trace);
      break;
    }
    case Algorithm::NsvmKernel: {
      const KernelSpec k = p.kernel.kind == KernelKind::Rbf ? KernelSpec::rbf(p.kernel.sigma) : KernelSpec::linear();
      auto t = train_kernel(d, k, p.config);
      r.model.payload = std::move(t.model);
      r.trace = std::move(t.trace);
      break;
    }
    case Algorithm::Gepsvm: r.model.payload = train_gepsvm(d, p.plane.delta); break;
    case Algorithm::Lstsvm: r.model.payload = train_lstsvm(d, p.plane.lambda, p.plane.delta); break;
    case Algorithm::Pcc: r.model.payload = train_pcc(d, p.plane.nu); break;
  }
  r.model.label_names = d.label_names;
  return r;
}

/// Standardizes with statistics of `d`, trains, and folds the standardizer into the model
/// so that it predicts on raw features.
inline FitResult fit(const ModelParams& p, const Dataset& d) {
  const Standardizer s = fit_standardizer(d);
  FitResult r = fit_as_given(p, apply_standardizer(s, d));
  r.model.set_standardizer(s);
  r.model.label_names = d.label_names;
  return r;
}

inline Trainer make_trainer(const ModelParams& p) {
  return [p](const Dataset& train) -> Predictor {
    auto model = std::make_shared<TrainedModel>(fit_as_given(p, train).model);
    return [model](const Matrix& x) { return predict(*model, x); };
  };
}

inline std::function<Trainer(const ParamPoint&)> make_trainer_factory(const ModelParams& base) {
  return [base](const ParamPoint& cell) { return make_trainer(with_point(base, cell)); };
}

}  // namespace nsvm

// nsvm: generate data, train, predict and cross-validate nonparallel-plane classifiers.
//
// Exit codes: 0 success, 2 invalid input or flags, 3 numerical failure.

#include <chrono>
#include <cstdio>
#include <iostream>
#include <map>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "nsvm/nsvm.hpp"

namespace {

constexpr int kExitInput = 2;
constexpr int kExitNumerical = 3;

struct DataOptions {
  std::string path;
  std::string format = "csv";
  bool has_header = false;
};

struct TrainOptions {
  std::string algo = "nsvm";
  double c1 = 1.0;
  double c2 = 1.0;
  double L = 1.0;
  int max_iter = 50;
  double tol = 1e-6;
  int restart = 50;
  std::string update = "stationarity";
  std::string guard = "adaptive-L";
  std::string kernel = "rbf";
  double sigma = 1.0;
  double delta = 1.0;
  double lambda = 1.0;
  double nu = 1.0;
  std::uint64_t seed = 0;
};

void add_data_options(CLI::App* cmd, DataOptions& o) {
  cmd->add_option("--data", o.path, "Input data file")->required();
  cmd->add_option("--format", o.format, "Input format")->check(CLI::IsMember({"csv", "libsvm"}));
  cmd->add_flag("--has-header", o.has_header, "CSV input starts with a header row");
}

void add_train_options(CLI::App* cmd, TrainOptions& o) {
  cmd->add_option("--algo", o.algo, "Algorithm")
      ->check(CLI::IsMember({"nsvm", "nsvm-kernel", "gepsvm", "lstsvm", "pcc"}));
  cmd->add_option("--c1", o.c1, "NSVM fit weight C1");
  cmd->add_option("--c2", o.c2, "NSVM loss weight C2");
  cmd->add_option("--L", o.L, "Proximal weight L");
  cmd->add_option("--max-iter", o.max_iter, "Solver iteration cap");
  cmd->add_option("--tol", o.tol, "Relative step tolerance");
  cmd->add_option("--restart", o.restart, "Extrapolation restart period");
  cmd->add_option("--update", o.update, "Subproblem update rule")->check(CLI::IsMember({"stationarity", "printed"}));
  cmd->add_option("--guard", o.guard, "Descent guard")->check(CLI::IsMember({"adaptive-L", "none"}));
  cmd->add_option("--kernel", o.kernel, "Kernel for nsvm-kernel")->check(CLI::IsMember({"linear", "rbf"}));
  cmd->add_option("--sigma", o.sigma, "RBF width");
  cmd->add_option("--delta", o.delta, "GEPSVM/LSTSVM regularizer");
  cmd->add_option("--lambda", o.lambda, "LSTSVM rest-class weight");
  cmd->add_option("--nu", o.nu, "PCC regularizer");
  cmd->add_option("--seed", o.seed, "Random seed");
}

nsvm::ModelParams to_params(const TrainOptions& o) {
  nsvm::ModelParams p;
  p.algorithm = nsvm::parse_algorithm(o.algo);
  p.config.C1 = o.c1;
  p.config.C2 = o.c2;
  p.config.L = o.L;
  p.config.max_iter = o.max_iter;
  p.config.tol = o.tol;
  p.config.restart_period = o.restart;
  p.config.seed = o.seed;
  p.config.update = o.update == "printed" ? nsvm::UpdateRule::Printed : nsvm::UpdateRule::Stationarity;
  p.config.guard = o.guard == "none" ? nsvm::DescentGuard::None : nsvm::DescentGuard::AdaptiveL;
  p.config.validate();
  p.kernel = o.kernel == "linear" ? nsvm::KernelSpec::linear() : nsvm::KernelSpec::rbf(o.sigma);
  p.plane = {o.delta, o.lambda, o.nu};
  return p;
}

nsvm::Dataset load(const DataOptions& o) {
  return o.format == "libsvm" ? nsvm::load_libsvm(o.path) : nsvm::load_csv(o.path, o.has_header);
}

template <typename Fn>
void write_output(const std::string& path, Fn&& body) {
  if (path.empty() || path == "-") {
    body(std::cout);
    std::cout.flush();
  } else {
    nsvm::detail::write_atomically(path, body);
  }
}

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

int cmd_gen(const std::string& dataset, int per_class, double noise, double outliers, std::uint64_t seed,
            const std::string& out) {
  const nsvm::Dataset d =
      dataset == "xor" ? nsvm::gen_xor() : nsvm::gen_cross_planes(per_class, noise, outliers, seed);
  write_output(out, [&](std::ostream& os) { nsvm::write_csv(os, d); });
  std::cerr << "wrote " << d.size() << " rows, " << d.features() << " features, " << d.K << " classes\n";
  return 0;
}

int cmd_train(const DataOptions& data, const TrainOptions& train, const std::string& out) {
  const nsvm::ModelParams params = to_params(train);
  const nsvm::Dataset d = load(data);
  const auto start = std::chrono::steady_clock::now();
  const nsvm::FitResult fitted = nsvm::fit(params, d);
  const double wall = seconds_since(start);
  const double acc = nsvm::accuracy(d.y, nsvm::predict(fitted.model, d.X));
  nsvm::save_model(out, fitted.model);

  using nsvm::detail::format_real;
  std::cout << "algorithm " << fitted.model.algorithm() << '\n';
  std::cout << "train_accuracy " << format_real(acc) << '\n';
  if (fitted.trace) {
    const auto& t = *fitted.trace;
    std::cout << "iterations " << t.iterations() << '\n';
    std::cout << "final_step " << format_real(t.final_step()) << '\n';
    std::cout << "final_relative_step " << format_real(t.final_relative_step()) << '\n';
    std::cout << "converged " << (t.converged ? "yes" : "no") << '\n';
    std::cout << "descent_check " << (params.config.enforces_descent() ? "passed" : "not enforced") << '\n';
  }
  std::cout << "wall_time_s " << format_real(wall) << '\n';
  std::cout << "model " << out << '\n';
  return 0;
}

int cmd_predict(const std::string& model_path, const DataOptions& data, const std::string& out) {
  const nsvm::TrainedModel model = nsvm::load_model(model_path);
  const nsvm::Dataset d = load(data);
  if (d.features() != model.n()) {
    throw nsvm::Error(nsvm::ErrorKind::DimensionMismatch, "model expects " + std::to_string(model.n()) +
                                                              " features, data has " + std::to_string(d.features()));
  }
  const std::vector<int> labels = nsvm::predict(model, d.X);
  write_output(out, [&](std::ostream& os) {
    os << "index,predicted_label\n";
    for (std::size_t i = 0; i < labels.size(); ++i)
      os << i << ',' << model.label_names[static_cast<std::size_t>(labels[i] - 1)] << '\n';
  });
  return 0;
}

int cmd_cv(const DataOptions& data, const TrainOptions& train, int folds, const std::string& grid,
           const std::string& out) {
  const nsvm::ModelParams params = to_params(train);
  const nsvm::GridSpec spec = grid == "none"      ? nsvm::GridSpec{}
                              : grid == "default" ? nsvm::default_grid(params.algorithm)
                                                  : nsvm::parse_grid(grid);
  const nsvm::Dataset d = load(data);
  const auto start = std::chrono::steady_clock::now();
  const nsvm::GridResult result = nsvm::grid_search(nsvm::make_trainer_factory(params), d, spec, folds, train.seed);
  const double wall = seconds_since(start);
  const nsvm::ReportContext ctx{train.algo, data.path, folds, train.seed, grid};
  write_output(out, [&](std::ostream& os) { nsvm::write_report(os, ctx, result, wall); });
  if (!out.empty() && out != "-") {
    using nsvm::detail::format_real;
    std::cout << "AC " << format_real(result.report.mean) << " Std " << format_real(result.report.std) << " best "
              << nsvm::format_params(result.best) << '\n';
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Nonparallel-plane classifiers: generate, train, predict, cross-validate"};
  app.require_subcommand(1);

  std::string gen_dataset = "cross-planes";
  int per_class = 100;
  double noise = 0.05;
  double outliers = 0.05;
  std::uint64_t gen_seed = 0;
  std::string gen_out;
  auto* gen = app.add_subcommand("gen", "Write a synthetic dataset as CSV");
  gen->add_option("--dataset", gen_dataset, "Dataset")->check(CLI::IsMember({"cross-planes", "xor"}));
  gen->add_option("--per-class", per_class, "Samples per class");
  gen->add_option("--noise", noise, "Perpendicular noise standard deviation");
  gen->add_option("--outliers", outliers, "Outlier fraction per class");
  gen->add_option("--seed", gen_seed, "Random seed");
  gen->add_option("--out", gen_out, "Output CSV (default stdout)");

  DataOptions train_data;
  TrainOptions train_opts;
  std::string train_out;
  auto* train = app.add_subcommand("train", "Train a model and save it");
  add_data_options(train, train_data);
  add_train_options(train, train_opts);
  train->add_option("--out", train_out, "Model file")->required();

  DataOptions predict_data;
  std::string predict_model;
  std::string predict_out;
  auto* pred = app.add_subcommand("predict", "Predict labels with a saved model");
  pred->add_option("--model", predict_model, "Model file")->required();
  add_data_options(pred, predict_data);
  pred->add_option("--out", predict_out, "Prediction CSV (default stdout)");

  DataOptions cv_data;
  TrainOptions cv_opts;
  int folds = 10;
  std::string grid = "none";
  std::string cv_out;
  auto* cv = app.add_subcommand("cv", "Stratified k-fold cross-validation with optional grid search");
  add_data_options(cv, cv_data);
  add_train_options(cv, cv_opts);
  cv->add_option("--folds", folds, "Number of folds");
  cv->add_option("--grid", grid, "default, none, or a spec such as 'C1=-4:4;C2=0.5,1,2^3'");
  cv->add_option("--out", cv_out, "Report file (default stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitInput;
  }

  try {
    if (*gen) return cmd_gen(gen_dataset, per_class, noise, outliers, gen_seed, gen_out);
    if (*train) return cmd_train(train_data, train_opts, train_out);
    if (*pred) return cmd_predict(predict_model, predict_data, predict_out);
    if (*cv) return cmd_cv(cv_data, cv_opts, folds, grid, cv_out);
  } catch (const nsvm::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return nsvm::is_numerical(e.kind()) ? kExitNumerical : kExitInput;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitInput;
  }
  return kExitInput;
}

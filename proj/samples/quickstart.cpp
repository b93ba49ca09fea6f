// Trains a linear NSVM on Cross-Planes, saves and reloads it, and compares it with LSTSVM
// under 10-fold cross-validation.

#include <cstdio>
#include <filesystem>

#include "nsvm/nsvm.hpp"

int main() {
  using namespace nsvm;

  const Dataset data = gen_cross_planes(100, 0.05, 0.05, 7);

  ModelParams params;
  params.algorithm = Algorithm::Nsvm;
  params.config.C1 = 1.0;
  params.config.C2 = 1.0;
  params.config.seed = 7;

  const FitResult fitted = fit(params, data);
  std::printf("training accuracy %.4f after %zu iterations (final step %.3g)\n",
              accuracy(data.y, predict(fitted.model, data.X)), fitted.trace->iterations(),
              fitted.trace->final_step());

  const auto path = (std::filesystem::temp_directory_path() / "nsvm_quickstart_model.txt").string();
  save_model(path, fitted.model);
  const TrainedModel reloaded = load_model(path);
  std::printf("reloaded model predicts identically: %s\n",
              predict(reloaded, data.X) == predict(fitted.model, data.X) ? "yes" : "no");
  std::filesystem::remove(path);

  const std::vector<double> values = powers_of_two(-4, 4, 2);
  const GridResult nsvm = grid_search(make_trainer_factory(params), data, {{{"C1", values}, {"C2", values}}}, 10, 7);

  ModelParams lst;
  lst.algorithm = Algorithm::Lstsvm;
  const GridResult lstsvm = grid_search(make_trainer_factory(lst), data, {{{"lambda", values}, {"delta", values}}}, 10, 7);

  std::printf("NSVM   10-CV %.4f ± %.4f at %s\n", nsvm.report.mean, nsvm.report.std, format_params(nsvm.best).c_str());
  std::printf("LSTSVM 10-CV %.4f ± %.4f at %s\n", lstsvm.report.mean, lstsvm.report.std,
              format_params(lstsvm.best).c_str());

  const TTestResult t = paired_ttest(nsvm.report.fold_accuracies, lstsvm.report.fold_accuracies);
  std::printf("paired t = %.3f, df = %d, p = %.3g\n", t.t_statistic, t.degrees_freedom, t.p_value);
}

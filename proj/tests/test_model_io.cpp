#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "nsvm/model_io.hpp"
#include "nsvm/pipeline.hpp"

namespace nsvm {
namespace {

ModelParams params_for(Algorithm a) {
  ModelParams p;
  p.algorithm = a;
  p.config.seed = 7;
  p.config.max_iter = 30;
  p.kernel = KernelSpec::rbf(1.5);
  p.plane = {0.01, 0.5, 0.25};
  return p;
}

std::string serialize(const TrainedModel& m) {
  std::ostringstream out;
  write_model(out, m);
  return out.str();
}

TrainedModel deserialize(const std::string& text) {
  std::istringstream in(text);
  return read_model(in);
}

std::filesystem::path temp_path(const std::string& name) {
  return std::filesystem::temp_directory_path() / ("nsvm_model_io_" + std::to_string(::getpid()) + "_" + name);
}

class RoundTrip : public ::testing::TestWithParam<Algorithm> {};

TEST_P(RoundTrip, PredictionsAndDistancesBitExact) {
  const Dataset d = gen_cross_planes(15, 0.05, 0.1, 3);
  const FitResult fitted = fit(params_for(GetParam()), d);
  const TrainedModel loaded = deserialize(serialize(fitted.model));

  EXPECT_EQ(loaded.algorithm(), fitted.model.algorithm());
  EXPECT_EQ(loaded.K(), fitted.model.K());
  EXPECT_EQ(loaded.n(), fitted.model.n());
  EXPECT_EQ(loaded.label_names, fitted.model.label_names);
  EXPECT_EQ(loaded.standardizer(), fitted.model.standardizer());

  const Dataset probe = gen_cross_planes(25, 0.3, 0.2, 99);
  EXPECT_EQ(predict(loaded, probe.X), predict(fitted.model, probe.X));
  EXPECT_EQ(serialize(loaded), serialize(fitted.model));
}

TEST_P(RoundTrip, PayloadFieldsIdentical) {
  const Dataset d = gen_cross_planes(10, 0.05, 0.0, 5);
  const TrainedModel m = fit(params_for(GetParam()), d).model;
  const TrainedModel r = deserialize(serialize(m));
  std::visit(
      [&](const auto& a) {
        using T = std::decay_t<decltype(a)>;
        const auto& b = std::get<T>(r.payload);
        if constexpr (std::is_same_v<T, LinearNsvmModel>) {
          EXPECT_EQ(a.weights.values, b.weights.values);
          EXPECT_EQ(a.degenerate, b.degenerate);
          EXPECT_EQ(a.config.C1, b.config.C1);
          EXPECT_EQ(a.config.seed, b.config.seed);
          EXPECT_EQ(a.config.update, b.config.update);
          EXPECT_EQ(a.config.guard, b.config.guard);
        } else if constexpr (std::is_same_v<T, KernelNsvmModel>) {
          EXPECT_EQ(a.alpha.values, b.alpha.values);
          EXPECT_EQ(a.train_X, b.train_X);
          EXPECT_EQ(a.kernel, b.kernel);
          EXPECT_EQ(a.gram_ridge, b.gram_ridge);
          EXPECT_EQ(a.rule, b.rule);
        } else {
          EXPECT_EQ(a.algorithm, b.algorithm);
          EXPECT_EQ(a.planes.values, b.planes.values);
          EXPECT_EQ(a.rule, b.rule);
          EXPECT_EQ(a.params.delta, b.params.delta);
          EXPECT_EQ(a.params.lambda, b.params.lambda);
          EXPECT_EQ(a.params.nu, b.params.nu);
        }
      },
      m.payload);
}

INSTANTIATE_TEST_SUITE_P(AllAlgorithms, RoundTrip,
                         ::testing::Values(Algorithm::Nsvm, Algorithm::NsvmKernel, Algorithm::Gepsvm, Algorithm::Lstsvm,
                                           Algorithm::Pcc),
                         [](const auto& info) {
                           std::string s = to_string(info.param);
                           std::erase(s, '-');
                           return s;
                         });

TEST(ModelIo, LinearKernelRoundTrip) {
  ModelParams p = params_for(Algorithm::NsvmKernel);
  p.kernel = KernelSpec::linear();
  const Dataset d = gen_xor();
  const TrainedModel m = fit(p, d).model;
  const TrainedModel r = deserialize(serialize(m));
  EXPECT_EQ(std::get<KernelNsvmModel>(r.payload).kernel.kind, KernelKind::Linear);
  EXPECT_EQ(predict(r, d.X), predict(m, d.X));
}

TEST(ModelIo, ExtremeRealsRoundTrip) {
  LinearNsvmModel lm;
  lm.weights = StackedWeights(2, 3);
  lm.weights.values = {1e-300, -4.9406564584124654e-324, 0.1, 1.0 / 3.0, -2.5e300, 123456789.123456789};
  lm.standardizer = {{0.1, -0.2}, {3.0, 7.0 / 9.0}};
  lm.degenerate = {false, true};
  TrainedModel m{lm, {"a", "b"}};
  const TrainedModel r = deserialize(serialize(m));
  EXPECT_EQ(std::get<LinearNsvmModel>(r.payload).weights.values, lm.weights.values);
  EXPECT_EQ(std::get<LinearNsvmModel>(r.payload).degenerate, lm.degenerate);
  EXPECT_EQ(r.standardizer(), lm.standardizer);
}

TEST(ModelIo, HeaderLayout) {
  const Dataset d = gen_xor();
  const std::string text = serialize(fit(params_for(Algorithm::Gepsvm), d).model);
  std::istringstream in(text);
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "nsvm-model 1");
  std::getline(in, line);
  EXPECT_EQ(line, "algorithm gepsvm");
  std::getline(in, line);
  EXPECT_EQ(line, "classes 2");
  std::getline(in, line);
  EXPECT_EQ(line, "features 2");
  EXPECT_TRUE(text.ends_with("end\n"));
}

TEST(ModelIo, OriginalLabelTokensKept) {
  std::istringstream csv("x,y,label\n0,1,setosa\n1,0,virginica\n0,2,setosa\n2,0,virginica\n");
  const Dataset d = parse_csv(csv, true);
  const TrainedModel r = deserialize(serialize(fit(params_for(Algorithm::Lstsvm), d).model));
  EXPECT_EQ(r.label_names, (std::vector<std::string>{"setosa", "virginica"}));
}

std::string replace_line(const std::string& text, const std::string& key, const std::string& replacement) {
  std::istringstream in(text);
  std::ostringstream out;
  std::string line;
  bool done = false;
  while (std::getline(in, line)) {
    if (!done && line.rfind(key, 0) == 0) {
      line = replacement;
      done = true;
    }
    out << line << '\n';
  }
  EXPECT_TRUE(done) << key;
  return out.str();
}

void expect_parse_error_at(const std::string& text, const std::string& fragment) {
  try {
    deserialize(text);
    FAIL() << "no error for " << fragment;
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::ParseError);
    EXPECT_NE(std::string(e.what()).find(fragment), std::string::npos) << e.what();
  }
}

TEST(ModelIo, CorruptInputReportsLine) {
  const std::string good = serialize(fit(params_for(Algorithm::Gepsvm), gen_xor()).model);
  expect_parse_error_at(replace_line(good, "nsvm-model", "nsvm-model 9"), "line 1: unsupported format_version 9");
  expect_parse_error_at(replace_line(good, "algorithm", "algorithm svm"), "unknown algorithm 'svm'");
  expect_parse_error_at(replace_line(good, "classes", "classes 1"), "line 4: bad class or feature count");
  expect_parse_error_at(replace_line(good, "standardizer.mean", "standardizer.mean 0 zero"), "line 7: bad real 'zero'");
  expect_parse_error_at(replace_line(good, "standardizer.scale", "standardizer.scale 1"), "line 8: expected 2 values");
  expect_parse_error_at(replace_line(good, "rule", "rule sideways"), "unknown distance rule");
  expect_parse_error_at(replace_line(good, "planes", "planes 3 3"), "line 13: weight block shape");
  expect_parse_error_at(replace_line(good, "end", "fin"), "expected 'end'");
  expect_parse_error_at(good.substr(0, good.size() / 2), "");
  expect_parse_error_at("", "line 0: unexpected end of file");
}

TEST(ModelIo, CorruptNsvmConfig) {
  const std::string good = serialize(fit(params_for(Algorithm::Nsvm), gen_xor()).model);
  expect_parse_error_at(replace_line(good, "config.update", "config.update sideways"), "unknown update rule");
  expect_parse_error_at(replace_line(good, "config.max_iter", "config.max_iter 1.5"), "bad integer '1.5'");
  expect_parse_error_at(replace_line(good, "degenerate", "degenerate 0"), "expected 2 integers");
}

TEST(ModelIo, SaveLoadAtomic) {
  const auto path = temp_path("model.txt");
  const TrainedModel m = fit(params_for(Algorithm::Pcc), gen_xor()).model;
  save_model(path.string(), m);
  EXPECT_FALSE(std::filesystem::exists(path.string() + ".tmp"));
  const TrainedModel r = load_model(path.string());
  EXPECT_EQ(serialize(r), serialize(m));
  save_model(path.string(), r);
  EXPECT_EQ(serialize(load_model(path.string())), serialize(m));
  std::filesystem::remove(path);
}

TEST(ModelIo, IoErrors) {
  try {
    load_model(temp_path("missing.txt").string());
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::IoError);
  }
  const TrainedModel m = fit(params_for(Algorithm::Pcc), gen_xor()).model;
  try {
    save_model("/nonexistent-dir/model.txt", m);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::IoError);
  }
}

GridResult small_result() {
  GridResult g;
  g.best = ParamPoint{{{"C1", 0.5}, {"C2", 2.0}}};
  g.cells = {{ParamPoint{{{"C1", 0.5}, {"C2", 2.0}}}, 0.75}, {ParamPoint{{{"C1", 1.0}, {"C2", 2.0}}}, 0.5}};
  g.report.fold_accuracies = {0.5, 1.0};
  g.report.fold_seconds = {0.25, 0.125};
  g.report.mean = 0.75;
  g.report.std = 0.3535533905932738;
  return g;
}

TEST(Report, Format) {
  std::ostringstream out;
  write_report(out, {"nsvm", "iris.csv", 2, 7, "custom"}, small_result(), 1.5);
  EXPECT_EQ(out.str(),
            "nsvm-report 1\n"
            "algorithm nsvm\n"
            "data iris.csv\n"
            "folds 2\n"
            "seed 7\n"
            "grid custom\n"
            "cells 2\n"
            "cell C1=0.5 C2=2 mean 0.75\n"
            "cell C1=1 C2=2 mean 0.5\n"
            "best C1=0.5 C2=2\n"
            "fold 1 accuracy 0.5\n"
            "fold 2 accuracy 1\n"
            "AC 0.75\n"
            "Std 0.3535533905932738\n"
            "time.fold 1 0.25\n"
            "time.fold 2 0.125\n"
            "time.total 1.5\n"
            "end\n");
}

TEST(Report, EmptyParamsPrintDash) { EXPECT_EQ(format_params(ParamPoint{}), "-"); }

TEST(Report, SaveAtomic) {
  const auto path = temp_path("report.txt");
  save_report(path.string(), {"pcc", "x.csv", 2, 1, "none"}, small_result(), 0.0);
  EXPECT_FALSE(std::filesystem::exists(path.string() + ".tmp"));
  std::ifstream in(path);
  std::string first;
  std::getline(in, first);
  EXPECT_EQ(first, "nsvm-report 1");
  std::filesystem::remove(path);
}

}  // namespace
}  // namespace nsvm

#include <gtest/gtest.h>

#include "nsvm/pipeline.hpp"

namespace nsvm {
namespace {

TEST(Algorithm, NamesRoundTrip) {
  for (Algorithm a : {Algorithm::Nsvm, Algorithm::NsvmKernel, Algorithm::Gepsvm, Algorithm::Lstsvm, Algorithm::Pcc})
    EXPECT_EQ(parse_algorithm(to_string(a)), a);
  EXPECT_THROW(parse_algorithm("svm"), Error);
}

TEST(WithPoint, OverridesNamedFields) {
  const ModelParams p = with_point({}, ParamPoint{{{"C1", 2.0}, {"C2", 3.0}, {"sigma", 4.0}, {"delta", 5.0},
                                                   {"lambda", 6.0}, {"nu", 7.0}}});
  EXPECT_EQ(p.config.C1, 2.0);
  EXPECT_EQ(p.config.C2, 3.0);
  EXPECT_EQ(p.kernel.sigma, 4.0);
  EXPECT_EQ(p.plane.delta, 5.0);
  EXPECT_EQ(p.plane.lambda, 6.0);
  EXPECT_EQ(p.plane.nu, 7.0);
  EXPECT_THROW(with_point({}, ParamPoint{{{"gamma", 1.0}}}), Error);
}

TEST(DefaultGrid, AxesPerAlgorithm) {
  EXPECT_EQ(default_grid(Algorithm::Nsvm).cells().size(), 21u * 21u);
  EXPECT_EQ(default_grid(Algorithm::NsvmKernel).axes.size(), 3u);
  EXPECT_EQ(default_grid(Algorithm::Gepsvm).axes.front().name, "delta");
  EXPECT_EQ(default_grid(Algorithm::Lstsvm).axes.size(), 2u);
  EXPECT_EQ(default_grid(Algorithm::Pcc).axes.front().values.front(), std::ldexp(1.0, -10));
}

TEST(ParseGrid, ListsPowersAndRanges) {
  const GridSpec g = parse_grid("C1=0.5, 2^3 ,1;C2=-2:1");
  ASSERT_EQ(g.axes.size(), 2u);
  EXPECT_EQ(g.axes[0].name, "C1");
  EXPECT_EQ(g.axes[0].values, (std::vector<double>{0.5, 8.0, 1.0}));
  EXPECT_EQ(g.axes[1].values, (std::vector<double>{0.25, 0.5, 1.0, 2.0}));
  EXPECT_EQ(g.cells().size(), 12u);
}

TEST(ParseGrid, Rejects) {
  for (const char* bad : {"", "C1", "C1=", "C1=x", "C1=2^0.5", "C1=3:1", "C1=a:2", "foo=1"}) {
    try {
      parse_grid(bad);
      ADD_FAILURE() << bad;
    } catch (const Error& e) {
      EXPECT_EQ(e.kind(), ErrorKind::BadParams) << bad;
    }
  }
}

TEST(Fit, FoldsStandardizerIntoModel) {
  Dataset d = gen_cross_planes(20, 0.02, 0.0, 4);
  for (std::size_t i = 0; i < d.size(); ++i) {
    d.X(i, 0) = 100.0 + 50.0 * d.X(i, 0);
    d.X(i, 1) = -3.0 + 0.01 * d.X(i, 1);
  }
  ModelParams p;
  p.algorithm = Algorithm::Nsvm;
  p.config.seed = 2;
  const FitResult r = fit(p, d);
  EXPECT_TRUE(r.trace.has_value());
  EXPECT_EQ(r.model.standardizer(), fit_standardizer(d));
  const Standardizer s = fit_standardizer(d);
  const TrainedModel inner = fit_as_given(p, apply_standardizer(s, d)).model;
  EXPECT_EQ(predict(r.model, d.X), predict(inner, s.apply(d.X)));
}

TEST(Fit, PlaneModelsHaveNoTrace) {
  ModelParams p;
  p.algorithm = Algorithm::Gepsvm;
  p.plane.delta = 0.01;
  const FitResult r = fit(p, gen_xor());
  EXPECT_FALSE(r.trace.has_value());
  EXPECT_EQ(accuracy(gen_xor().y, predict(r.model, gen_xor().X)), 1.0);
}

TEST(MakeTrainer, MatchesDirectFit) {
  const Dataset d = gen_cross_planes(10, 0.05, 0.0, 8);
  ModelParams p;
  p.algorithm = Algorithm::Lstsvm;
  const Predictor predictor = make_trainer(p)(d);
  EXPECT_EQ(predictor(d.X), predict(fit_as_given(p, d).model, d.X));
}

TEST(MakeTrainerFactory, AppliesCell) {
  const Dataset d = gen_cross_planes(10, 0.05, 0.0, 8);
  ModelParams base;
  base.algorithm = Algorithm::Pcc;
  const ParamPoint cell{{{"nu", 0.125}}};
  ModelParams direct = base;
  direct.plane.nu = 0.125;
  EXPECT_EQ(make_trainer_factory(base)(cell)(d)(d.X), predict(fit_as_given(direct, d).model, d.X));
}

}  // namespace
}  // namespace nsvm

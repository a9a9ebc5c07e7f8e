#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <sstream>

#include "wada/data.hpp"
#include "wada/dynamics.hpp"
#include "wada/eval.hpp"

using namespace wada;

namespace {

bool same_state(const SolverState& a, const SolverState& b) {
  if (a.pi.groups.size() != b.pi.groups.size() || a.nu.size() != b.nu.size()) return false;
  for (std::size_t i = 0; i < a.pi.groups.size(); ++i)
    for (std::size_t j = 0; j < a.pi.groups[i].attacks.size(); ++j)
      if (a.pi.groups[i].attacks[j].z != b.pi.groups[i].attacks[j].z) return false;
  for (std::size_t k = 0; k < a.nu.size(); ++k)
    if (a.nu.particles[k].theta() != b.nu.particles[k].theta()) return false;
  return true;
}

}  // namespace

TEST(Regression1d, NoiselessLabelsFollowTheCurve) {
  const auto ds = gen_regression_1d(50, 0.0, 1);
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const double x = ds.inputs[i][0];
    EXPECT_GE(x, -1.0);
    EXPECT_LE(x, 1.0);
    EXPECT_NEAR(ds.labels[i], 0.5 * std::sin(std::numbers::pi * x) + 0.5, 1e-15);
  }
}

TEST(Regression1d, SinglePoint) {
  const auto ds = gen_regression_1d(1, 0.05, 2);
  EXPECT_EQ(ds.size(), 1u);
  EXPECT_EQ(ds.input_dim(), 1u);
}

TEST(Regression1d, LabelMeanIsNearOneHalf) {
  const auto ds = gen_regression_1d(1000, 0.05, 3);
  double mean = 0;
  for (double y : ds.labels) mean += y / 1000.0;
  EXPECT_GE(mean, 0.4);
  EXPECT_LE(mean, 0.6);
}

TEST(Regression1d, PureFunctionOfSeed) {
  const auto a = gen_regression_1d(20, 0.1, 4), b = gen_regression_1d(20, 0.1, 4), c = gen_regression_1d(20, 0.1, 5);
  EXPECT_EQ(a.inputs, b.inputs);
  EXPECT_EQ(a.labels, b.labels);
  EXPECT_NE(a.inputs, c.inputs);
}

TEST(TwoMoons, BalancedDisjointArcs) {
  const auto ds = gen_two_moons(100, 0.0, 6);
  std::size_t ones = 0;
  for (double y : ds.labels) ones += y == 1.0;
  EXPECT_EQ(ones, 50u);
  double closest = 1e9;
  for (std::size_t i = 0; i < ds.size(); ++i)
    for (std::size_t j = 0; j < ds.size(); ++j)
      if (ds.labels[i] != ds.labels[j])
        closest = std::min(closest, std::hypot(ds.inputs[i][0] - ds.inputs[j][0], ds.inputs[i][1] - ds.inputs[j][1]));
  EXPECT_GT(closest, 0.0);
  for (std::size_t i = 0; i < ds.size(); ++i) EXPECT_TRUE(ds.box.contains(ds.point(i)));
}

TEST(TwoMoons, OddCountThrows) { EXPECT_THROW(gen_two_moons(7, 0.1, 1), OddCount); }

TEST(TwoMoons, TrainedSigmoidEnsembleClassifiesWell) {
  const auto ds = with_bias_feature(gen_two_moons(400, 0.05, 7));
  InitSpec spec;
  spec.param_particles = 64;
  spec.seed = 7;
  SolverConfig cfg;
  cfg.schedule = {ScheduleKind::constant, 0.5};
  cfg.max_steps = 1500;
  cfg.checkpoint_every = 1500;
  cfg.freeze_adversary = true;
  const auto trace = run(init_state(ds, spec), PayoffModel{}, cfg);
  EXPECT_GE(accuracy(trace.final_state.nu, ds, Activation{}), 0.9);
}

TEST(BiasFeature, AppendsAFixedCoordinate) {
  const auto ds = with_bias_feature(gen_two_moons(4, 0.1, 1));
  EXPECT_EQ(ds.input_dim(), 3u);
  EXPECT_EQ(ds.box.lower[2], 1.0);
  EXPECT_EQ(ds.box.upper[2], 1.0);
  for (const auto& x : ds.inputs) EXPECT_EQ(x[2], 1.0);
}

TEST(ShuffleSplit, PartitionsThePoints) {
  const auto ds = gen_regression_1d(40, 0.05, 8);
  const auto [train, test] = shuffle_split(ds, 0.25, 9);
  EXPECT_EQ(train.size(), 30u);
  EXPECT_EQ(test.size(), 10u);
  double a = 0, b = 0;
  for (const auto& x : ds.inputs) a += x[0];
  for (const auto& x : train.inputs) b += x[0];
  for (const auto& x : test.inputs) b += x[0];
  EXPECT_NEAR(a, b, 1e-12);
}

TEST(LoadCsv, RoundTripIsExact) {
  const auto ds = gen_two_moons(20, 0.1, 10);
  std::stringstream ss;
  write_csv(ss, ds);
  EXPECT_EQ(ss.str().substr(0, ss.str().find('\n')), "x_1,x_2,y");
  const auto back = load_csv(ss, ds.box);
  EXPECT_EQ(back.inputs, ds.inputs);
  EXPECT_EQ(back.labels, ds.labels);
}

TEST(LoadCsv, HeaderOnlyIsEmpty) {
  std::stringstream ss("x_1,y\n");
  EXPECT_THROW(load_csv(ss, default_data_box(1)), EmptyDataset);
}

TEST(LoadCsv, MalformedCellNamesTheRow) {
  std::stringstream ss("x_1,y\n0.1,0.2\n0.3,0.4\n0.5,oops\n");
  try {
    load_csv(ss, default_data_box(1));
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.row(), 3u);
    EXPECT_EQ(e.column(), 1u);
  }
}

TEST(LoadCsv, OutOfBoxRowIsRejected) {
  std::stringstream ss("x_1,y\n0.1,0.2\n2.0,0.4\n");
  try {
    load_csv(ss, default_data_box(1));
    FAIL() << "expected OutOfBox";
  } catch (const OutOfBox& e) {
    EXPECT_EQ(e.row(), 2u);
  }
}

TEST(LoadCsv, MissingFileIsAnIoError) {
  EXPECT_THROW(load_csv(std::string("/nonexistent/data.csv"), default_data_box(1)), IoError);
}

TEST(InitState, DiagonalHasZeroCost) {
  const auto ds = gen_regression_1d(6, 0.05, 11);
  InitSpec spec;
  spec.attacks_per_anchor = 3;
  spec.param_particles = 4;
  const auto s = init_state(ds, spec);
  for (const auto& g : s.pi.groups)
    for (const auto& at : g.attacks) EXPECT_EQ(at.z, g.anchor());
  ParamMeasure zero = s.nu;
  for (auto& p : zero.particles) p.a = 0.0;
  // h == 0, so the payoff is the mean squared label with no cost.
  double mean_sq = 0;
  for (double y : ds.labels) mean_sq += y * y / 6.0;
  EXPECT_NEAR(payoff(s.pi, zero, PayoffModel{}), mean_sq, 1e-15);
}

TEST(InitState, SingleParticleMasses) {
  const auto ds = gen_regression_1d(5, 0.05, 12);
  InitSpec spec;
  spec.attacks_per_anchor = 1;
  spec.param_particles = 1;
  const auto s = init_state(ds, spec);
  ASSERT_EQ(s.pi.groups.size(), 5u);
  for (const auto& g : s.pi.groups) {
    ASSERT_EQ(g.attacks.size(), 1u);
    EXPECT_EQ(g.group_mass(), 0.2);
    EXPECT_EQ(g.attacks[0].omega, 0.2);
  }
  ASSERT_EQ(s.nu.size(), 1u);
  EXPECT_EQ(s.nu.particles[0].alpha, 1.0);
  EXPECT_NO_THROW(validate(s.pi));
  EXPECT_NO_THROW(validate(s.nu));
}

TEST(InitState, ConditionalNoiseIsReproducibleAndSeedOnlyMovesPositions) {
  const auto ds = gen_regression_1d(8, 0.05, 13);
  InitSpec spec;
  spec.pi0 = AttackInitKind::conditional_noise;
  spec.pi0_std = 0.1;
  spec.attacks_per_anchor = 4;
  spec.param_particles = 5;
  spec.seed = 1;
  const auto a = init_state(ds, spec), b = init_state(ds, spec);
  EXPECT_TRUE(same_state(a, b));
  std::ostringstream sa, sb;
  write_csv(sa, a.pi);
  write_csv(sb, b.pi);
  EXPECT_EQ(sa.str(), sb.str());
  spec.seed = 2;
  const auto c = init_state(ds, spec);
  EXPECT_FALSE(same_state(a, c));
  for (std::size_t i = 0; i < a.pi.groups.size(); ++i)
    for (std::size_t j = 0; j < 4; ++j) EXPECT_EQ(a.pi.groups[i].attacks[j].omega, c.pi.groups[i].attacks[j].omega);
  for (std::size_t k = 0; k < a.nu.size(); ++k) EXPECT_EQ(a.nu.particles[k].alpha, c.nu.particles[k].alpha);
}

TEST(InitState, OutputIsValidAndInsideTheBoxes) {
  const auto ds = gen_two_moons(30, 0.2, 14);
  InitSpec spec;
  spec.pi0 = AttackInitKind::conditional_noise;
  spec.pi0_std = 1.0;
  spec.nu0 = ParamInitKind::gaussian_clipped;
  spec.nu0_std = 5.0;
  spec.attacks_per_anchor = 3;
  spec.param_particles = 20;
  const auto s = init_state(ds, spec);
  EXPECT_NO_THROW(validate(s.pi));
  EXPECT_NO_THROW(validate(s.nu));
  EXPECT_LE(mass_residuals(s.pi, s.nu).worst(), 1e-15);
}

TEST(InitState, RejectsBadSpecs) {
  const auto ds = gen_regression_1d(3, 0.05, 15);
  InitSpec spec;
  spec.attacks_per_anchor = 0;
  EXPECT_THROW(init_state(ds, spec), InvalidConfig);
  spec.attacks_per_anchor = 1;
  spec.param_particles = 0;
  EXPECT_THROW(init_state(ds, spec), InvalidConfig);
  EXPECT_THROW(init_state(Dataset{{}, {}, default_data_box(1)}, InitSpec{}), EmptyDataset);
}

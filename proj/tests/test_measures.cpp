#include <gtest/gtest.h>

#include <random>
#include <sstream>

#include "oracles.hpp"
#include "wada/data.hpp"
#include "wada/dynamics.hpp"
#include "wada/measures.hpp"

using namespace wada;

namespace {

CouplingMeasure one_group(Vec anchor, std::vector<Attack> atk, double mass) {
  CouplingMeasure pi;
  pi.z_box = default_data_box(anchor.size() - 1);
  pi.groups.emplace_back(std::move(anchor), std::move(atk), mass);
  return pi;
}

}  // namespace

TEST(MarginalZ, SingleGroupIsDirac) {
  auto pi = one_group({0.0, 0.0}, {{{0.1, 0.2}, 1.0}}, 1.0);
  const auto m = marginal_z(pi);
  ASSERT_EQ(m.size(), 1u);
  EXPECT_EQ(m.points[0], (Vec{0.0, 0.0}));
  EXPECT_EQ(m.masses[0], 1.0);
}

TEST(MarginalZ, TwoHalfGroupsAreUniform) {
  CouplingMeasure pi;
  pi.z_box = default_data_box(1);
  pi.groups.emplace_back(Vec{-0.5, 0.2}, std::vector<Attack>{{{-0.5, 0.2}, 0.5}}, 0.5);
  pi.groups.emplace_back(Vec{0.5, 0.7}, std::vector<Attack>{{{0.4, 0.6}, 0.5}}, 0.5);
  const auto m = marginal_z(pi);
  ASSERT_EQ(m.size(), 2u);
  EXPECT_EQ(m.points[0], (Vec{-0.5, 0.2}));
  EXPECT_EQ(m.points[1], (Vec{0.5, 0.7}));
  EXPECT_EQ(m.masses[0], 0.5);
  EXPECT_EQ(m.masses[1], 0.5);
}

TEST(MarginalZ, GeneratedDataIsUniformEmpirical) {
  const auto ds = gen_regression_1d(32, 0.05, 3);
  InitSpec spec;
  spec.attacks_per_anchor = 4;
  spec.param_particles = 2;
  const auto s = init_state(ds, spec);
  const auto m = marginal_z(s.pi);
  ASSERT_EQ(m.size(), 32u);
  double total = 0;
  for (std::size_t i = 0; i < m.size(); ++i) {
    EXPECT_EQ(m.masses[i], 1.0 / 32);
    EXPECT_EQ(m.points[i], ds.point(i));
    total += m.masses[i];
  }
  EXPECT_NEAR(total, 1.0, 1e-15);
}

TEST(Conditional, EqualWeights) {
  auto pi = one_group({0.0, 0.5}, {{{0, 0.5}, 0.25}, {{0, 0.5}, 0.25}, {{0, 0.5}, 0.25}, {{0, 0.5}, 0.25}}, 1.0);
  EXPECT_EQ(conditional(pi, 0), (Vec{0.25, 0.25, 0.25, 0.25}));
}

TEST(Conditional, DirectNormalization) {
  auto pi = one_group({0.0, 0.5}, {{{0, 0.5}, 0.3}, {{0, 0.5}, 0.1}}, 0.4);
  const auto w = conditional(pi, 0);
  EXPECT_NEAR(w[0], 0.75, 1e-15);
  EXPECT_NEAR(w[1], 0.25, 1e-15);
}

TEST(Conditional, ZeroMassGroupThrows) {
  auto pi = one_group({0.0, 0.5}, {{{0, 0.5}, 0.0}}, 0.0);
  try {
    conditional(pi, 0);
    FAIL() << "expected ZeroMassGroup";
  } catch (const ZeroMassGroup& e) {
    EXPECT_EQ(e.group(), 0u);
  }
}

TEST(Conditional, MatchesHandRecomputedExpWeightsAfterStep) {
  // One anchor, three attacks, h == 0 (a = 0), squared loss: U_pi = y~^2 - c_a |z - z~|^2.
  CouplingMeasure pi;
  pi.z_box = default_data_box(1);
  const Vec anchor{0.0, 0.5};
  std::vector<Attack> atk{{{0.1, 0.5}, 0.1}, {{0.0, 0.6}, 0.2}, {{-0.2, 0.4}, 0.2}};
  pi.groups.emplace_back(anchor, atk, 0.5);
  pi.groups.emplace_back(Vec{0.3, 0.3}, std::vector<Attack>{{{0.3, 0.3}, 0.5}}, 0.5);
  ParamMeasure nu;
  nu.theta_box = default_param_box(1);
  nu.particles.push_back({0.0, {1.0}, 1.0});
  SolverState s{0, 0, pi, nu};
  PayoffModel model;
  SolverConfig cfg;
  cfg.schedule = {ScheduleKind::constant, 0.01};
  const auto next = step(s, model, cfg);

  double w[3], total = 0;
  for (int j = 0; j < 3; ++j) {
    const auto& z = atk[j].z;
    const double u = z[1] * z[1] - 10.0 * ((z[0] - anchor[0]) * (z[0] - anchor[0]) + (z[1] - anchor[1]) * (z[1] - anchor[1]));
    w[j] = atk[j].omega * std::exp(0.01 * 0.25 * u);
    total += w[j];
  }
  const auto got = conditional(next.pi, 0);
  for (int j = 0; j < 3; ++j) EXPECT_NEAR(got[j], w[j] / total, 1e-14);
  EXPECT_NEAR(got[0] + got[1] + got[2], 1.0, 1e-12);
}

TEST(MassResiduals, FreshMeasuresAreExact) {
  const auto ds = gen_regression_1d(10, 0.05, 1);
  InitSpec spec;
  spec.attacks_per_anchor = 3;
  spec.param_particles = 7;
  const auto s = init_state(ds, spec);
  const auto r = mass_residuals(s.pi, s.nu);
  EXPECT_LE(r.group_max, 1e-15);
  EXPECT_LE(r.pi_total, 1e-15);
  EXPECT_LE(r.nu_total, 1e-15);
}

TEST(MassResiduals, CorruptedWeightShowsInjectedPerturbation) {
  const auto ds = gen_regression_1d(4, 0.05, 1);
  InitSpec spec;
  spec.attacks_per_anchor = 2;
  spec.param_particles = 4;
  auto s = init_state(ds, spec);
  s.pi.groups[2].attacks[1].omega += 1e-3;
  s.nu.particles[0].alpha -= 2e-3;
  const auto r = mass_residuals(s.pi, s.nu);
  EXPECT_NEAR(r.group_max, 1e-3, 1e-15);
  EXPECT_NEAR(r.nu_total, 2e-3, 1e-15);
  EXPECT_LE(r.pi_total, 1e-15);
}

TEST(MassResiduals, SmallAfterThousandSteps) {
  const auto ds = gen_regression_1d(8, 0.05, 2);
  InitSpec spec;
  spec.attacks_per_anchor = 4;
  spec.param_particles = 16;
  spec.pi0 = AttackInitKind::conditional_noise;
  spec.seed = 5;
  SolverConfig cfg;
  cfg.max_steps = 1000;
  cfg.checkpoint_every = 100;
  const auto trace = run(init_state(ds, spec), PayoffModel{}, cfg);
  EXPECT_LE(mass_residuals(trace.final_state.pi, trace.final_state.nu).worst(), 1e-10);
}

TEST(Validate, RejectsBrokenMeasures) {
  auto pi = one_group({0.0, 0.5}, {{{0, 0.5}, 0.5}, {{0, 0.5}, 0.5}}, 1.0);
  EXPECT_NO_THROW(validate(pi));
  pi.groups[0].attacks[0].omega = 0.4;
  EXPECT_THROW(validate(pi), InvalidMeasure);
  pi.groups[0].attacks[0].omega = 0.5;
  pi.groups[0].attacks[1].z = {2.0, 0.5};
  EXPECT_THROW(validate(pi), InvalidMeasure);
  pi.groups[0].attacks[1].z = {0.0};
  EXPECT_THROW(validate(pi), DimensionMismatch);

  ParamMeasure nu;
  nu.theta_box = default_param_box(1);
  nu.particles.push_back({1.0, {0.5}, 0.7});
  EXPECT_THROW(validate(nu), InvalidMeasure);
  nu.particles.push_back({1.0, {0.5}, 0.3});
  EXPECT_NO_THROW(validate(nu));
  nu.particles[1].a = 5.0;
  EXPECT_THROW(validate(nu), InvalidMeasure);
  nu.particles[1].a = 1.0;
  nu.particles[1].alpha = -0.3;
  nu.particles[0].alpha = 1.3;
  EXPECT_THROW(validate(nu), InvalidMeasure);
}

TEST(Box, ProjectionIsIdempotent) {
  std::mt19937_64 rng(11);
  std::normal_distribution<double> n(0.0, 3.0);
  const Box box(Vec{-1.5, -1.0, 0.0}, Vec{1.5, 2.0, 1.0});
  for (int t = 0; t < 200; ++t) {
    Vec p{n(rng), n(rng), n(rng)};
    const Vec once = box.projected(p);
    EXPECT_TRUE(box.contains(once));
    EXPECT_EQ(box.projected(once), once);
  }
}

TEST(Csv, CouplingRoundTripIsExact) {
  std::mt19937_64 rng(4);
  const auto pi = oracle::random_pi(rng, 2, 5, 3);
  std::stringstream ss;
  write_csv(ss, pi);
  EXPECT_EQ(ss.str().substr(0, ss.str().find('\n')), "group_id,z_1,z_2,z_3,zt_1,zt_2,zt_3,omega");
  const auto back = read_coupling_csv(ss, pi.z_box);
  ASSERT_EQ(back.groups.size(), pi.groups.size());
  for (std::size_t i = 0; i < pi.groups.size(); ++i) {
    EXPECT_EQ(back.groups[i].anchor(), pi.groups[i].anchor());
    EXPECT_NEAR(back.groups[i].group_mass(), pi.groups[i].group_mass(), 1e-16);
    ASSERT_EQ(back.groups[i].attacks.size(), pi.groups[i].attacks.size());
    for (std::size_t j = 0; j < pi.groups[i].attacks.size(); ++j) {
      EXPECT_EQ(back.groups[i].attacks[j].z, pi.groups[i].attacks[j].z);
      EXPECT_EQ(back.groups[i].attacks[j].omega, pi.groups[i].attacks[j].omega);
    }
  }
}

TEST(Csv, ParamRoundTripIsExact) {
  std::mt19937_64 rng(5);
  const auto nu = oracle::random_nu(rng, 3, 6);
  std::stringstream ss;
  write_csv(ss, nu);
  EXPECT_EQ(ss.str().substr(0, ss.str().find('\n')), "a,b_1,b_2,b_3,alpha");
  const auto back = read_param_csv(ss, nu.theta_box);
  ASSERT_EQ(back.size(), nu.size());
  for (std::size_t k = 0; k < nu.size(); ++k) {
    EXPECT_EQ(back.particles[k].theta(), nu.particles[k].theta());
    EXPECT_EQ(back.particles[k].alpha, nu.particles[k].alpha);
  }
}

TEST(Csv, MalformedRowsAreRejected) {
  std::stringstream ss("a,b_1,alpha\n1,2,0.5\n1,x,0.5\n");
  try {
    read_param_csv(ss, default_param_box(1));
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.row(), 2u);
    EXPECT_EQ(e.column(), 1u);
  }
}

TEST(Entropy, UniformGroupsHaveLogN) {
  auto pi = one_group({0.0, 0.5}, {{{0, 0.5}, 0.25}, {{0, 0.5}, 0.25}, {{0, 0.5}, 0.25}, {{0, 0.5}, 0.25}}, 1.0);
  EXPECT_NEAR(mean_conditional_entropy(pi), std::log(4.0), 1e-15);
}

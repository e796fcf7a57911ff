#include <array>
#include <cmath>
#include <numbers>
#include <vector>

#include <gtest/gtest.h>

#include <pointvortex/dynamics.hpp>
#include <pointvortex/integrator.hpp>
#include <pointvortex/selfsimilar.hpp>

#include "oracle.hpp"

using pv::Vec2;

namespace {

double max_deviation(std::span<const Vec2> p, std::span<const Vec2> q) {
  double m = 0;
  for (std::size_t i = 0; i < p.size(); ++i) m = std::max(m, pv::distance(p[i], q[i]));
  return m;
}

void expect_record_shape(const pv::TrajectoryRecord& rec) {
  ASSERT_FALSE(rec.times.empty());
  EXPECT_EQ(rec.times.size(), rec.states.size());
  EXPECT_EQ(rec.times.size(), rec.invariants.size());
  for (std::size_t k = 1; k < rec.times.size(); ++k) EXPECT_LT(rec.times[k - 1], rec.times[k]);
  if (rec.termination == pv::Termination::collapsed)
    EXPECT_LE(rec.invariants.back().min_pair_distance, rec.collapse_radius);
}

}  // namespace

TEST(Integrate, TranslatingPair) {
  const pv::VortexState s({{0, 0}, {1, 0}}, {1, -1}, 1.0);
  const auto rec = pv::integrate(s, 0.0, 1.0);
  expect_record_shape(rec);
  ASSERT_EQ(rec.termination, pv::Termination::reached_final_time);
  EXPECT_DOUBLE_EQ(rec.t_end(), 1.0);
  const auto x = rec.states.back().positions();
  EXPECT_NEAR(x[0].x, 0.0, 1e-12);
  EXPECT_NEAR(x[0].y, 1.0, 1e-12);
  EXPECT_NEAR(x[1].x, 1.0, 1e-12);
  EXPECT_NEAR(x[1].y, 1.0, 1e-12);
  for (const auto& inv : rec.invariants) EXPECT_NEAR(inv.min_pair_distance, 1.0, 1e-10);
}

TEST(Integrate, CoRotatingPairReturnsAfterPi) {
  const pv::VortexState s({{-0.5, 0}, {0.5, 0}}, {1, 1}, 1.0);
  const auto rec = pv::integrate(s, 0.0, std::numbers::pi);
  ASSERT_EQ(rec.termination, pv::Termination::reached_final_time);
  EXPECT_LT(max_deviation(rec.states.back().positions(), s.positions()), 1e-8);
}

TEST(Integrate, OutputTimesAreSampled) {
  pv::IntegratorOptions opts;
  opts.record_steps = false;
  opts.output_times = {0.25, 0.5, 0.75, 2.0};
  const pv::VortexState s({{-0.5, 0}, {0.5, 0}}, {1, 1}, 1.0);
  const auto rec = pv::integrate(s, 0.0, 1.0, opts);
  ASSERT_EQ(rec.times.size(), 5u);
  EXPECT_EQ(rec.times[1], 0.25);
  EXPECT_EQ(rec.times[3], 0.75);
  EXPECT_EQ(rec.times[4], 1.0);
  // Exact circular motion with angular speed 2.
  const auto x = rec.states[2].positions();
  EXPECT_NEAR(x[1].x, 0.5 * std::cos(1.0), 1e-11);
  EXPECT_NEAR(x[1].y, 0.5 * std::sin(1.0), 1e-11);
}

TEST(Integrate, RejectsBadArguments) {
  const pv::VortexState s({{0, 0}, {1, 0}}, {1, -1}, 1.0);
  EXPECT_THROW(pv::integrate(s, 1.0, 1.0), pv::PreconditionError);
  pv::IntegratorOptions opts;
  opts.rel_tol = 0.0;
  EXPECT_THROW(pv::integrate(s, 0.0, 1.0, opts), pv::PreconditionError);
  opts = {};
  opts.collapse_radius = -1.0;
  EXPECT_THROW(pv::integrate(s, 0.0, 1.0, opts), pv::PreconditionError);
}

TEST(Integrate, StepLimit) {
  pv::IntegratorOptions opts;
  opts.max_steps = 3;
  const pv::VortexState s({{-0.5, 0}, {0.5, 0}}, {1, 1}, 1.0);
  const auto rec = pv::integrate(s, 0.0, 100.0, opts);
  EXPECT_EQ(rec.termination, pv::Termination::step_limit);
  expect_record_shape(rec);
}

TEST(Integrate, AlreadyInsideRadius) {
  pv::IntegratorOptions opts;
  opts.collapse_radius = 1e-3;
  const pv::VortexState s({{0, 0}, {1e-4, 0}, {5, 5}}, {1, 1, 1}, 1.0);
  const auto rec = pv::integrate(s, 0.0, 1.0, opts);
  EXPECT_EQ(rec.termination, pv::Termination::collapsed);
  EXPECT_EQ(*rec.collapse_time, 0.0);
}

class SelfSimilarCollapse : public ::testing::TestWithParam<double> {};

TEST_P(SelfSimilarCollapse, CollapsesAtPredictedTime) {
  const double alpha = GetParam();
  const auto sol = pv::build_collapsing_configuration(alpha);
  const auto rec = pv::integrate(sol.initial_state, 0.0, 2.0 * sol.T);
  expect_record_shape(rec);
  ASSERT_EQ(rec.termination, pv::Termination::collapsed) << rec.message;
  const double tc = pv::refine_collapse_time(rec);
  EXPECT_LT(std::abs(tc - sol.T) / sol.T, 1e-3);
  EXPECT_NEAR(tc, *rec.collapse_time, 1e-10 * sol.T);
}

INSTANTIATE_TEST_SUITE_P(Alphas, SelfSimilarCollapse, ::testing::Values(0.5, 1.0, 2.0, 3.0));

TEST(RefineCollapseTime, RejectsNonCollapsedRecord) {
  const pv::VortexState s({{0, 0}, {1, 0}}, {1, -1}, 1.0);
  const auto rec = pv::integrate(s, 0.0, 0.1);
  EXPECT_THROW(pv::refine_collapse_time(rec), pv::NoCollapse);
}

TEST(RefineCollapseTime, SyntheticLinearApproach) {
  const double T = 2.0;
  pv::TrajectoryRecord rec;
  rec.termination = pv::Termination::collapsed;
  rec.collapse_radius = 1e-8;
  for (int k = 0; k <= 64; ++k) {
    const double t = T * k / 64.0;
    const double d = T - t;
    rec.times.push_back(t);
    rec.states.emplace_back(std::vector<Vec2>{{0, 0}, {std::max(d, 1e-300), 0}}, std::vector<double>{1, 1}, 1.0);
    pv::InvariantSample inv;
    inv.min_pair_distance = d;
    rec.invariants.push_back(inv);
  }
  EXPECT_NEAR(pv::refine_collapse_time(rec), T - 1e-8, 1e-14);
}

TEST(Integrate, TimeReversal) {
  oracle::Gen gen(21);
  for (int k = 0; k < 20; ++k) {
    const std::size_t n = gen.index(2, 5);
    const double alpha = gen.uniform(0.5, 2.0);
    const auto x = gen.separated_points(n, 1.0, 0.3);
    const auto a = gen.intensities(n);
    const pv::VortexState s(x, a, alpha);
    const auto fwd = pv::integrate(s, 0.0, 0.5);
    if (fwd.termination != pv::Termination::reached_final_time) continue;
    std::vector<double> neg;
    for (double v : a) neg.push_back(-v);
    const auto end = fwd.states.back().positions();
    const pv::VortexState back_start(std::vector<Vec2>(end.begin(), end.end()), neg, alpha);
    const auto bwd = pv::integrate(back_start, 0.0, 0.5);
    ASSERT_EQ(bwd.termination, pv::Termination::reached_final_time);
    EXPECT_LT(max_deviation(bwd.states.back().positions(), s.positions()), 1e-8);
  }
}

TEST(Integrate, AgreesWithFixedStepOracle) {
  oracle::Gen gen(22);
  for (int k = 0; k < 5; ++k) {
    const std::size_t n = 3;
    const double alpha = gen.uniform(0.5, 2.0);
    const auto x = gen.separated_points(n, 1.0, 0.5);
    const auto a = gen.intensities(n);
    const auto rec = pv::integrate(pv::VortexState(x, a, alpha), 0.0, 0.5);
    ASSERT_EQ(rec.termination, pv::Termination::reached_final_time);
    const auto ref = oracle::rk4(x, a, alpha, 0.5, 20000);
    EXPECT_LT(max_deviation(rec.states.back().positions(), ref), 1e-9);
  }
}

TEST(Integrate, StepHalvingOrder) {
  // Fixed steps: the controller is pinned at max_step and the tolerance is loose enough to accept
  // every step. Error is measured against a run with 10x tighter tolerance than the default.
  const pv::VortexState s({{0, 0}, {1, 0}, {0.3, 0.8}}, {1.0, 0.7, -0.4}, 1.0);
  const double t1 = 1.0;
  pv::IntegratorOptions ref_opts;
  ref_opts.rel_tol = 1e-13;
  ref_opts.abs_tol = 1e-15;
  const auto ref = pv::integrate(s, 0.0, t1, ref_opts);
  ASSERT_EQ(ref.termination, pv::Termination::reached_final_time);
  std::vector<double> errs;
  for (double h : {0.1, 0.05, 0.025}) {
    pv::IntegratorOptions opts;
    opts.rel_tol = 1.0;
    opts.abs_tol = 1.0;
    opts.max_step = h;
    opts.initial_step = h;
    const auto rec = pv::integrate(s, 0.0, t1, opts);
    ASSERT_EQ(rec.termination, pv::Termination::reached_final_time);
    EXPECT_EQ(rec.rejected_steps, 0u);
    errs.push_back(max_deviation(rec.states.back().positions(), ref.states.back().positions()));
  }
  for (std::size_t k = 0; k + 1 < errs.size(); ++k) {
    const double order = std::log2(errs[k] / errs[k + 1]);
    EXPECT_GE(order, 4.0) << "errors " << errs[k] << " -> " << errs[k + 1];
  }
}

TEST(Integrate, TolerancePinsError) {
  // Adaptive runs: tightening the tolerance by 2^5 shrinks the mean step by about 2 and the error
  // by at least 2^4, i.e. the observed order in the mean step is at least 4.
  const pv::VortexState s({{0, 0}, {1, 0}, {0.3, 0.8}}, {1.0, 0.7, -0.4}, 1.0);
  pv::IntegratorOptions ref_opts;
  ref_opts.rel_tol = 1e-14;
  ref_opts.abs_tol = 1e-16;
  const auto ref = pv::integrate(s, 0.0, 1.0, ref_opts);
  std::vector<double> err, steps;
  for (double tol : {1e-5, 1e-5 / 32, 1e-5 / 1024}) {
    pv::IntegratorOptions opts;
    opts.rel_tol = tol;
    opts.abs_tol = tol;
    const auto rec = pv::integrate(s, 0.0, 1.0, opts);
    err.push_back(max_deviation(rec.states.back().positions(), ref.states.back().positions()));
    steps.push_back(static_cast<double>(rec.accepted_steps));
  }
  for (std::size_t k = 0; k + 1 < err.size(); ++k) {
    const double order = std::log(err[k] / err[k + 1]) / std::log(steps[k + 1] / steps[k]);
    EXPECT_GE(order, 4.0) << err[k] << " " << err[k + 1] << " steps " << steps[k] << " " << steps[k + 1];
  }
}

TEST(Integrate, ConservesInvariantsOnRandomRuns) {
  oracle::Gen gen(23);
  for (int k = 0; k < 20; ++k) {
    const double alpha = std::array{0.5, 1.0, 2.0}[k % 3];
    const auto x = gen.separated_points(5, 1.0, 0.2);
    const auto a = gen.intensities(5);
    const auto rec = pv::integrate(pv::VortexState(x, a, alpha), 0.0, 1.0);
    if (rec.termination != pv::Termination::reached_final_time) continue;
    const auto& i0 = rec.invariants.front();
    const auto& i1 = rec.invariants.back();
    EXPECT_LE(std::abs(i1.hamiltonian - i0.hamiltonian), 1e-9 * std::max(1.0, std::abs(i0.hamiltonian)));
    EXPECT_LE(std::abs(i1.momentum - i0.momentum), 1e-9 * std::max(1.0, std::abs(i0.momentum)));
    EXPECT_LE(pv::norm(i1.vorticity_vector - i0.vorticity_vector), 1e-9 * std::max(1.0, pv::norm(i0.vorticity_vector)));
  }
}

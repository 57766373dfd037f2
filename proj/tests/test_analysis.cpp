#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "test_instances.hpp"

using namespace pmdlab;

namespace {

/// Shared fixed inputs for the frozen bound values.
BoundInputs frozen_inputs() {
  BoundInputs in;
  in.gamma = 0.8;
  in.alpha = 0.9;
  in.lambda = 1.0;
  in.num_states = 6;
  in.num_actions = 4;
  in.sigma_floor = 0.03;
  in.mix_m = 2.5;
  in.mix_kappa = 0.7;
  in.d0 = 1.3;
  return in;
}

double rel_err(double got, double want) {
  return std::abs(got - want) / std::abs(want);
}

}  // namespace

TEST_CASE("contraction factor of the damped weighted backup", "[analysis]") {
  REQUIRE_THAT(contraction_rho(0.9, 0.8, 0.03),
               Catch::Matchers::WithinAbs(1.0 - 0.9 * 0.2 * 0.03, 1e-15));
  REQUIRE(contraction_rho(1.0, 0.0, 1.0) == 0.0);
}

TEST_CASE("stale-average attenuation, all four regimes", "[analysis]") {
  const double m = 2.5, kappa = 0.7, gamma = 0.8;
  // theta below the chain rate
  REQUIRE(rel_err(psi_bound(32, 0.5, m, kappa, gamma),
                  0.00069026729640244929) < 1e-12);
  // theta equal to the chain rate
  REQUIRE(rel_err(psi_bound(10, 0.7, m, kappa, gamma),
                  m * 10.0 * std::pow(0.7, 9) / 0.2) < 1e-12);
  // theta between the chain rate and one
  REQUIRE(rel_err(psi_bound(10, 0.9, m, kappa, gamma),
                  m * std::pow(0.9, 10) / (0.2 * (0.9 - 0.7))) < 1e-12);
  // flat averaging
  REQUIRE(rel_err(psi_bound(10, 1.0, m, kappa, gamma),
                  m / (10.0 * 0.2 * 0.3)) < 1e-12);
}

TEST_CASE("noise moment constant matches the frozen value", "[analysis]") {
  REQUIRE(rel_err(noise_moment_constant(frozen_inputs()),
                  149.66629547095769) < 1e-12);
}

TEST_CASE("average-iterate guarantees match the frozen values", "[analysis]") {
  const BoundInputs in = frozen_inputs();
  const int K = 800;
  const BatchSchedule batches = BatchSchedule::constant(32);
  const TheoremBound t1 =
      theorem_bound(TheoremId::OffPolicyAverage, in, K, batches, 0.5);
  REQUIRE(rel_err(t1.value, 3485.7668434315619) < 1e-12);
  REQUIRE(rel_err(t1.eta_used, 4.6808238975153229e-06) < 1e-12);
  const TheoremBound t3 =
      theorem_bound(TheoremId::MixedAverage, in, K, batches, 0.5);
  REQUIRE(rel_err(t3.value, 14683.42740744796) < 1e-12);
}

TEST_CASE("last-iterate guarantees match the frozen values", "[analysis]") {
  const BoundInputs in = frozen_inputs();
  const int K = 40;
  const BatchSchedule batches = BatchSchedule::constant(64);
  const TheoremBound t2 =
      theorem_bound(TheoremId::OffPolicyLast, in, K, batches, 1.0, 12.0);
  REQUIRE(rel_err(t2.value, 231095.772237622) < 1e-12);
  const TheoremBound cor1 =
      theorem_bound(TheoremId::GreedyLast, in, K, batches, 1.0);
  REQUIRE(rel_err(cor1.value, 611.22298971894134) < 1e-12);
}

TEST_CASE("guarantee preconditions are enforced", "[analysis]") {
  const BoundInputs in = frozen_inputs();
  const BatchSchedule batches = BatchSchedule::constant(32);
  // Average-iterate forms pick their own step size; passing one is an error.
  REQUIRE_THROWS_AS(theorem_bound(TheoremId::OffPolicyAverage, in, 100,
                                  batches, 0.5, 2.0),
                    ValidationError);
  // Last-iterate forms need the step size that was actually run.
  REQUIRE_THROWS_AS(theorem_bound(TheoremId::OffPolicyLast, in, 100, batches,
                                  1.0),
                    ValidationError);
  // Average-iterate forms require a constant batch size.
  BatchSchedule varying;
  varying.sizes = {8, 16, 32};
  REQUIRE_THROWS_AS(theorem_bound(TheoremId::OffPolicyAverage, in, 2,
                                  varying, 0.5),
                    ValidationError);
}

TEST_CASE("noise accumulation recurrence", "[analysis]") {
  const double rho = 0.93;
  const BatchSchedule batches = BatchSchedule::constant(64);
  REQUIRE(xi(0, rho, batches) == 0.0);
  // xi(t) = sum_k rho^{t-1-k} / sqrt(b_k)
  const double direct = std::pow(rho, 2) / 8.0 + rho / 8.0 + 1.0 / 8.0;
  REQUIRE_THAT(xi(3, rho, batches), Catch::Matchers::WithinAbs(direct, 1e-14));
  // Growing batches shrink the accumulated noise.
  BatchSchedule growing;
  growing.sizes = {16, 64, 256, 1024};
  REQUIRE(xi(4, rho, growing) < xi(4, rho, BatchSchedule::constant(16)));
}

TEST_CASE("perturbation sensitivity of the stationary law", "[analysis]") {
  // Brute-force check on a fixed pair of chains.
  Matrix p(2, 2), q(2, 2);
  p << 0.7, 0.3, 0.4, 0.6;
  q << 0.68, 0.32, 0.43, 0.57;
  const StateDist nu_p = stationary_dist(p);
  const StateDist nu_q = stationary_dist(q);
  const MixingEstimate est = estimate_mixing(p, nu_p);
  const double diff = matrix_inf_norm(p - q);
  REQUIRE_THAT(diff, Catch::Matchers::WithinAbs(0.06, 1e-12));
  const double bound = stationary_shift_bound(est, diff);
  REQUIRE(d_tv(nu_p, nu_q) <= bound);
  // The sensitivity factor itself: ceil(log_kappa 1/m) + 1/(1-kappa).
  REQUIRE_THAT(shift_sensitivity(2.0, 0.5),
               Catch::Matchers::WithinAbs(
                   std::ceil(std::log(0.5) / std::log(0.5)) + 2.0, 1e-12));
}

TEST_CASE("policy changes move the chain at most linearly", "[analysis]") {
  const TabularMdp mdp = testutil::eval_mdp();
  SplitRng rng(41, 0);
  for (int trial = 0; trial < 10; ++trial) {
    Policy a, b;
    a.probs.resize(3, 2);
    b.probs.resize(3, 2);
    for (int s = 0; s < 3; ++s) {
      auto r1 = random_simplex(rng, 2);
      auto r2 = random_simplex(rng, 2);
      a.probs(s, 0) = r1[0];
      a.probs(s, 1) = r1[1];
      b.probs(s, 0) = r2[0];
      b.probs(s, 1) = r2[1];
    }
    const double kernel_shift =
        matrix_inf_norm(transition_matrix_s(mdp, a) -
                        transition_matrix_s(mdp, b));
    REQUIRE(kernel_shift <=
            mdp.num_actions * policy_inf_distance(a, b) + 1e-12);
  }
}

TEST_CASE("composed-chain scaling of the sensitivity factor", "[analysis]") {
  // Composing with a fixed first factor multiplies the per-step shift by at
  // most one, so the composed sensitivity uses the same envelope.
  const double scale = composed_shift_scale(3, 2.0, 0.5);
  REQUIRE(scale >= 1.0);
}

TEST_CASE("schedules are feasible, monotone in eps, and exact in cost",
          "[analysis]") {
  BoundInputs in;
  in.gamma = 0.6;
  in.alpha = 1.0;
  in.lambda = 1.0;
  in.num_states = 5;
  in.num_actions = 3;
  in.sigma_floor = 0.06;
  in.mix_m = 1.8;
  in.mix_kappa = 0.55;
  in.d0 = std::log(3.0);

  const ScheduleResult coarse =
      remark_schedules(ScheduleKind::AdaptiveStep, 0.4, in, 1.0, 1e-9);
  const ScheduleResult fine =
      remark_schedules(ScheduleKind::AdaptiveStep, 0.2, in, 1.0, 1e-9);
  REQUIRE(coarse.num_iterations >= 1);
  REQUIRE(fine.num_iterations >= coarse.num_iterations);
  REQUIRE(coarse.eta > 0.0);
  REQUIRE(fine.eta >= coarse.eta);
  REQUIRE(static_cast<int>(coarse.batches.sizes.size()) ==
          coarse.num_iterations + 1);
  // Batch sizes grow along the run.
  for (std::size_t i = 1; i < coarse.batches.sizes.size(); ++i) {
    REQUIRE(coarse.batches.sizes[i] >= coarse.batches.sizes[i - 1]);
  }
  REQUIRE(coarse.total_samples == coarse.batches.total(coarse.num_iterations + 1));
  // The closed-form cost quadruples exactly when eps halves.
  REQUIRE(fine.total_samples_formula == 4.0 * coarse.total_samples_formula);

  const ScheduleResult greedy =
      remark_schedules(ScheduleKind::BatchGreedy, 0.3, in, 1.0, 1e-9);
  REQUIRE(static_cast<int>(greedy.batches.sizes.size()) ==
          greedy.num_iterations);
  REQUIRE(greedy.eta == 0.0);

  const ScheduleResult flat =
      remark_schedules(ScheduleKind::ConstantStep, 0.5, in, 0.4, 1.0);
  REQUIRE(flat.batches.is_constant());
  REQUIRE(flat.eta > 0.0);
  // The single-batch form requires averaging faster than the chain mixes.
  REQUIRE_THROWS_AS(remark_schedules(ScheduleKind::ConstantStep, 0.5, in, 0.9),
                    ValidationError);
  // Infeasible accuracy is reported, not silently truncated.
  REQUIRE_THROWS_AS(remark_schedules(ScheduleKind::AdaptiveStep, 1e-8, in),
                    ValidationError);
}

TEST_CASE("measured constants line up with hand values", "[analysis]") {
  const TabularMdp mdp = testutil::eval_mdp();
  const Policy pi_b = uniform_policy(3, 2);
  const BehaviorModel behavior = make_behavior(mdp, pi_b);
  const OptimalSolution sol = value_iteration(mdp, 1e-12);
  const BoundInputs in =
      extract_constants(mdp, behavior, MirrorMap::negative_entropy(),
                        uniform_policy(3, 2), sol.pi_star, 0.9);
  REQUIRE(in.gamma == mdp.gamma);
  REQUIRE(in.alpha == 0.9);
  REQUIRE(in.num_states == 3);
  REQUIRE(in.num_actions == 2);
  REQUIRE(in.sigma_floor == behavior.sigma_floor);
  REQUIRE(in.mix_m >= 1.0);
  REQUIRE(in.mix_kappa > 0.0);
  REQUIRE(in.mix_kappa < 1.0);
  // Divergence from a deterministic comparator to uniform is log|A|.
  REQUIRE_THAT(in.d0, Catch::Matchers::WithinAbs(std::log(2.0), 1e-12));
}

TEST_CASE("pathwise decomposition closes to rounding error", "[analysis]") {
  const TabularMdp mdp = testutil::eval_mdp();
  const Policy pi_b = uniform_policy(3, 2);
  const BehaviorModel behavior = make_behavior(mdp, pi_b);
  const OptimalSolution sol = value_iteration(mdp, 1e-12);

  AlgoConfig cfg = testutil::base_config(
      AlgoKind::Expected, MirrorMap::negative_entropy(), 12, 6, 19);
  cfg.theta = 0.5;
  SplitRng rng(19, 0);
  const RunResult run = run_expected_td_pmd(mdp, behavior, cfg, rng);
  for (int state = 0; state < 3; ++state) {
    const BiasDecomposition dec =
        bias_decomposition(mdp, run, behavior, sol.pi_star, state, 9);
    REQUIRE(dec.residual <= 1e-9 * (1.0 + std::abs(dec.lhs)));
    REQUIRE(static_cast<int>(dec.c.size()) == 9);
  }

  AlgoConfig acfg = testutil::base_config(
      AlgoKind::Approximate, MirrorMap::squared_l2(), 10, 4, 23);
  SplitRng rng2(23, 0);
  const RunResult arun = run_approximate_td_pmd(mdp, pi_b, acfg, rng2);
  const BiasDecomposition adec =
      bias_decomposition(mdp, arun, behavior, sol.pi_star, 1, 10);
  REQUIRE(adec.residual <= 1e-9 * (1.0 + std::abs(adec.lhs)));
}

#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "test_instances.hpp"

using namespace pmdlab;
using testutil::eval_mdp;

TEST_CASE("planner on a zero-reward model stops after one sweep", "[oracle]") {
  TabularMdp mdp = eval_mdp();
  mdp.rewards.setZero();
  const OptimalSolution sol = value_iteration(mdp);
  REQUIRE(sol.iterations == 1);
  REQUIRE(sol.q_star.lpNorm<Eigen::Infinity>() == 0.0);
  REQUIRE(sol.v_star.lpNorm<Eigen::Infinity>() == 0.0);
  REQUIRE(sol.residual == 0.0);
}

TEST_CASE("planner fixed point and greedy certificate", "[oracle]") {
  const TabularMdp mdp = eval_mdp();
  const OptimalSolution sol = value_iteration(mdp, 1e-12);
  // The table satisfies its own optimality equation.
  const QVec back = optimal_bellman_q(mdp, sol.q_star);
  REQUIRE((back - sol.q_star).lpNorm<Eigen::Infinity>() <= 1e-12);
  REQUIRE(sol.residual <= 1e-12);
  // v_star is the per-state max of q_star.
  const VVec mx = max_state_values(sol.q_star, mdp.num_states, mdp.num_actions);
  REQUIRE((mx - sol.v_star).lpNorm<Eigen::Infinity>() == 0.0);
  // The reported policy is greedy: it puts all mass on a maximizing action.
  for (int s = 0; s < mdp.num_states; ++s) {
    for (int a = 0; a < mdp.num_actions; ++a) {
      if (sol.pi_star.probs(s, a) > 0.0) {
        REQUIRE(sol.q_star(mdp.idx(s, a)) == mx(s));
      }
    }
  }
  // Evaluating the greedy policy recovers the optimal table.
  const auto [v_pi, q_pi] = policy_value(mdp, sol.pi_star);
  REQUIRE((q_pi - sol.q_star).lpNorm<Eigen::Infinity>() <= 1e-10);
}

TEST_CASE("planner accuracy scales with the tolerance", "[oracle]") {
  const TabularMdp mdp = eval_mdp();
  const OptimalSolution tight = value_iteration(mdp, 1e-13);
  const OptimalSolution loose = value_iteration(mdp, 1e-6);
  REQUIRE((tight.q_star - loose.q_star).lpNorm<Eigen::Infinity>() <= 1e-6);
  REQUIRE(loose.iterations < tight.iterations);
}

TEST_CASE("optimal values dominate random policies", "[oracle]") {
  const TabularMdp mdp = eval_mdp();
  const OptimalSolution sol = value_iteration(mdp, 1e-12);
  SplitRng rng(77, 0);
  for (int trial = 0; trial < 10; ++trial) {
    Policy pi;
    pi.probs.resize(3, 2);
    for (int s = 0; s < 3; ++s) {
      auto row = random_simplex(rng, 2);
      pi.probs(s, 0) = row[0];
      pi.probs(s, 1) = row[1];
    }
    const auto [v_pi, q_pi] = policy_value(mdp, pi);
    REQUIRE((sol.v_star - v_pi).minCoeff() >= -1e-9);
  }
}

TEST_CASE("exact mirror-descent iterates improve monotonically", "[oracle]") {
  const TabularMdp mdp = eval_mdp();
  for (const MirrorMap& map :
       {MirrorMap::negative_entropy(), MirrorMap::squared_l2()}) {
    const std::vector<PmdIterate> path =
        exact_pmd(mdp, map, uniform_policy(3, 2), 1.0, 60);
    REQUIRE(path.size() == 61);
    double prev = -1e300;
    for (const PmdIterate& it : path) {
      const VVec v = policy_state_values(it.pi, it.q);
      const double level = v.minCoeff();
      REQUIRE(level >= prev - 1e-12);
      prev = level;
      // Stored critics are the exact values of the stored policies.
      const auto [v_ref, q_ref] = policy_value(mdp, it.pi);
      REQUIRE((q_ref - it.q).lpNorm<Eigen::Infinity>() <= 1e-10);
    }
    // After 60 exact steps the policy is near-optimal on this small model.
    const OptimalSolution sol = value_iteration(mdp, 1e-12);
    const auto [v_last, q_last] = policy_value(mdp, path.back().pi);
    REQUIRE((sol.v_star - v_last).lpNorm<Eigen::Infinity>() < 1e-3);
  }
}

TEST_CASE("stale-critic recursion still converges on an easy model",
          "[oracle]") {
  const TabularMdp mdp = eval_mdp();
  const OptimalSolution sol = value_iteration(mdp, 1e-12);
  const std::vector<PmdIterate> path = exact_td_pmd(
      mdp, MirrorMap::negative_entropy(), uniform_policy(3, 2), 1.0, 200);
  const auto [v_first, q_first] = policy_value(mdp, path.front().pi);
  const auto [v_last, q_last] = policy_value(mdp, path.back().pi);
  const double start_gap = (sol.v_star - v_first).lpNorm<Eigen::Infinity>();
  const double end_gap = (sol.v_star - v_last).lpNorm<Eigen::Infinity>();
  REQUIRE(end_gap < 0.01 * start_gap);
  // The stale critic lags the true one but stays within the value range.
  for (const PmdIterate& it : path) {
    REQUIRE(it.q.minCoeff() >= 0.0);
    REQUIRE(it.q.maxCoeff() <= 1.0 / (1.0 - mdp.gamma) + 1e-9);
  }
}

TEST_CASE("average-iterate guarantee for the exact recursion", "[oracle]") {
  const TabularMdp mdp = eval_mdp();
  const OptimalSolution sol = value_iteration(mdp, 1e-12);
  StateDist mu = StateDist::Constant(3, 1.0 / 3.0);
  for (const MirrorMap& map :
       {MirrorMap::negative_entropy(), MirrorMap::squared_l2()}) {
    for (double eta : {0.1, 1.0, 10.0}) {
      const int K = 120;
      const Policy pi0 = uniform_policy(3, 2);
      const std::vector<PmdIterate> path = exact_pmd(mdp, map, pi0, eta, K);
      double avg_gap = 0.0;
      for (int k = 0; k <= K; ++k) {
        const auto [v_k, q_k] =
            policy_value(mdp, path[static_cast<std::size_t>(k)].pi);
        avg_gap += mu.dot(sol.v_star - v_k);
      }
      avg_gap /= static_cast<double>(K + 1);
      double d0 = 0.0;
      for (int s = 0; s < 3; ++s) {
        d0 = std::max
             (d0, bregman(map, sol.pi_star.probs.row(s).transpose(),
                          pi0.probs.row(s).transpose()));
      }
      const double g = 1.0 - mdp.gamma;
      const double bound =
          (d0 / (eta * g) + 1.0 / (g * g)) / static_cast<double>(K + 1);
      REQUIRE(avg_gap <= bound + 1e-9);
      REQUIRE(avg_gap >= -1e-9);
    }
  }
}

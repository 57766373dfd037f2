#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "test_instances.hpp"

using namespace pmdlab;
using testutil::eval_mdp;
using testutil::eval_policy;
using testutil::visit_mdp;
using testutil::visit_policy;

static_assert(Matrix::IsRowMajor, "tables must be row-major for the samplers");

TEST_CASE("state-action indexing is state-major", "[mdp]") {
  TabularMdp mdp = eval_mdp();
  REQUIRE(mdp.idx(0, 0) == 0);
  REQUIRE(mdp.idx(0, 1) == 1);
  REQUIRE(mdp.idx(2, 1) == 5);
}

TEST_CASE("distribution validation tolerates 1e-12 and rejects worse", "[mdp]") {
  Vector good(3);
  good << 0.3, 0.3, 0.4 + 5e-13;
  REQUIRE_NOTHROW(validate_distribution(good, kInputProbTol, "probe"));
  Vector off_sum(3);
  off_sum << 0.3, 0.3, 0.41;
  REQUIRE_THROWS_AS(validate_distribution(off_sum, kInputProbTol, "probe"), ValidationError);
  Vector negative(2);
  negative << 1.1, -0.1;
  REQUIRE_THROWS_AS(validate_distribution(negative, kInputProbTol, "probe"), ValidationError);
  try {
    validate_distribution(off_sum, kInputProbTol, "row 7");
    FAIL("expected a validation error");
  } catch (const ValidationError& e) {
    REQUIRE(std::string(e.what()).find("row 7") != std::string::npos);
  }
}

TEST_CASE("model validation rejects out-of-range pieces", "[mdp]") {
  TabularMdp mdp = eval_mdp();
  REQUIRE_NOTHROW(validate_mdp(mdp));

  TabularMdp bad_gamma = mdp;
  bad_gamma.gamma = 1.0;
  REQUIRE_THROWS_AS(validate_mdp(bad_gamma), ValidationError);
  bad_gamma.gamma = -0.1;
  REQUIRE_THROWS_AS(validate_mdp(bad_gamma), ValidationError);

  TabularMdp bad_reward = mdp;
  bad_reward.rewards(1, 0) = 1.5;
  REQUIRE_THROWS_AS(validate_mdp(bad_reward), ValidationError);
  bad_reward.rewards(1, 0) = -0.2;
  REQUIRE_THROWS_AS(validate_mdp(bad_reward), ValidationError);

  TabularMdp bad_row = mdp;
  bad_row.transitions(3, 0) += 0.05;
  REQUIRE_THROWS_AS(validate_mdp(bad_row), ValidationError);
}

TEST_CASE("uniform policy rows are exact", "[mdp]") {
  Policy pi = uniform_policy(4, 5);
  REQUIRE(pi.num_states() == 4);
  REQUIRE(pi.num_actions() == 5);
  for (int s = 0; s < 4; ++s) {
    for (int a = 0; a < 5; ++a) REQUIRE(pi.probs(s, a) == 0.2);
  }
}

TEST_CASE("policy-averaged backup reproduces truncated rollouts", "[mdp]") {
  const TabularMdp mdp = eval_mdp();
  const Policy pi = eval_policy();
  // Iterate the evaluation backup 500 times from zero; the truncated
  // reference values are correct to ~1e-22.
  QVec q = QVec::Zero(6);
  for (int t = 0; t < 500; ++t) q = bellman_q(mdp, pi, q);
  const double kQT[6] = {6.4176306034967183, 5.5359597434381973,
                         5.7683958367468131, 6.2430132201217665,
                         5.3306140481057724, 5.6542700109717376};
  for (int i = 0; i < 6; ++i) {
    REQUIRE_THAT(q(i), Catch::Matchers::WithinAbs(kQT[i], 1e-12));
  }
  const VVec v = policy_state_values(pi, q);
  const double kVT[3] = {6.0649622594733108, 6.1243588742780268,
                         5.4924420295387568};
  // v here averages Q_{500}, i.e. V_{501} up to the last backup; stay loose.
  for (int s = 0; s < 3; ++s) {
    REQUIRE_THAT(v(s), Catch::Matchers::WithinAbs(kVT[s], 1e-10));
  }
}

TEST_CASE("exact evaluation matches the truncated reference", "[mdp]") {
  const TabularMdp mdp = eval_mdp();
  const Policy pi = eval_policy();
  const auto [v, q] = policy_value(mdp, pi);
  const double kVT[3] = {6.0649622594733108, 6.1243588742780268,
                         5.4924420295387568};
  const double kQT[6] = {6.4176306034967183, 5.5359597434381973,
                         5.7683958367468131, 6.2430132201217665,
                         5.3306140481057724, 5.6542700109717376};
  for (int s = 0; s < 3; ++s) {
    REQUIRE_THAT(v(s), Catch::Matchers::WithinAbs(kVT[s], 1e-10));
  }
  for (int i = 0; i < 6; ++i) {
    REQUIRE_THAT(q(i), Catch::Matchers::WithinAbs(kQT[i], 1e-10));
  }
  // The solution satisfies its own fixed-point equation tightly.
  const QVec back = bellman_q(mdp, pi, q);
  REQUIRE((back - q).lpNorm<Eigen::Infinity>() < 1e-10);
}

TEST_CASE("visitation matches the truncated series and sums to one", "[mdp]") {
  const TabularMdp mdp = visit_mdp();
  const Policy pi = visit_policy();
  StateDist mu(2);
  mu << 0.6, 0.4;
  const StateDist d = visitation(mdp, pi, mu);
  REQUIRE_THAT(d(0), Catch::Matchers::WithinAbs(0.62837837837837807, 1e-12));
  REQUIRE_THAT(d(1), Catch::Matchers::WithinAbs(0.37162162162162166, 1e-12));
  REQUIRE_THAT(d.sum(), Catch::Matchers::WithinAbs(1.0, 1e-12));
}

TEST_CASE("kernel builders are consistent with each other", "[mdp]") {
  const TabularMdp mdp = eval_mdp();
  const Policy pi = eval_policy();
  const Matrix ps = transition_matrix_s(mdp, pi);
  REQUIRE(ps.rows() == 3);
  REQUIRE(ps.cols() == 3);
  for (int s = 0; s < 3; ++s) {
    REQUIRE_THAT(ps.row(s).sum(), Catch::Matchers::WithinAbs(1.0, 1e-12));
  }
  const Matrix psa = transition_matrix_sa(mdp, pi);
  REQUIRE(psa.rows() == 6);
  REQUIRE(psa.cols() == 6);
  for (int i = 0; i < 6; ++i) {
    REQUIRE_THAT(psa.row(i).sum(), Catch::Matchers::WithinAbs(1.0, 1e-12));
  }
  // Applying the state-action kernel to Q equals P * (policy average of Q).
  SplitRng rng(3, 0);
  QVec q(6);
  for (int i = 0; i < 6; ++i) q(i) = rng.next_double();
  const QVec via_matrix = psa * q;
  const QVec via_apply = apply_transition_sa(mdp, pi, q);
  REQUIRE((via_matrix - via_apply).lpNorm<Eigen::Infinity>() < 1e-12);
}

TEST_CASE("composed state kernel is the product of the two", "[mdp]") {
  const TabularMdp mdp = eval_mdp();
  const Policy pi_b = uniform_policy(3, 2);
  const Policy pi = eval_policy();
  const Matrix lhs = compose_s(mdp, pi_b, pi);
  const Matrix rhs = transition_matrix_s(mdp, pi_b) * transition_matrix_s(mdp, pi);
  REQUIRE((lhs - rhs).lpNorm<Eigen::Infinity>() < 1e-14);
}

TEST_CASE("performance-difference identity closes", "[mdp]") {
  const TabularMdp mdp = eval_mdp();
  SplitRng rng(11, 0);
  for (int trial = 0; trial < 5; ++trial) {
    Policy p1;
    p1.probs.resize(3, 2);
    VVec v(3);
    for (int s = 0; s < 3; ++s) {
      auto r1 = random_simplex(rng, 2);
      for (int a = 0; a < 2; ++a) {
        p1.probs(s, a) = r1[static_cast<std::size_t>(a)];
      }
      v(s) = rng.next_double() * 5.0;
    }
    StateDist mu(3);
    auto rm = random_simplex(rng, 3);
    for (int s = 0; s < 3; ++s) mu(s) = rm[static_cast<std::size_t>(s)];
    REQUIRE(perf_diff_check(mdp, p1, v, mu) < 1e-10);
  }
}

TEST_CASE("greedy extraction prefers the lowest index on ties", "[mdp]") {
  QVec q(4);
  q << 0.5, 0.7, 0.7, 0.1;  // one state, four actions, tie at 1 and 2
  const std::vector<int> acts = greedy_actions(q, 1, 4);
  REQUIRE(acts.size() == 1);
  REQUIRE(acts[0] == 1);
  const Policy pi = greedy_policy(q, 1, 4);
  REQUIRE(pi.probs(0, 1) == 1.0);
  REQUIRE(pi.probs(0, 0) == 0.0);
  REQUIRE(pi.probs(0, 2) == 0.0);
}

TEST_CASE("state value helpers agree with direct loops", "[mdp]") {
  const TabularMdp mdp = eval_mdp();
  SplitRng rng(5, 0);
  QVec q(6);
  for (int i = 0; i < 6; ++i) q(i) = rng.next_double() * 3.0;
  const Policy pi = eval_policy();
  const VVec w = policy_state_values(pi, q);
  const VVec mx = max_state_values(q, 3, 2);
  for (int s = 0; s < 3; ++s) {
    double acc = 0.0;
    for (int a = 0; a < 2; ++a) acc += pi.probs(s, a) * q(mdp.idx(s, a));
    REQUIRE_THAT(w(s), Catch::Matchers::WithinAbs(acc, 1e-15));
    REQUIRE(mx(s) == std::max(q(mdp.idx(s, 0)), q(mdp.idx(s, 1))));
  }
}

TEST_CASE("optimality backup dominates every policy backup", "[mdp]") {
  const TabularMdp mdp = eval_mdp();
  SplitRng rng(6, 0);
  QVec q(6);
  for (int i = 0; i < 6; ++i) q(i) = rng.next_double() * 2.0;
  const QVec best = optimal_bellman_q(mdp, q);
  for (int trial = 0; trial < 4; ++trial) {
    Policy pi;
    pi.probs.resize(3, 2);
    for (int s = 0; s < 3; ++s) {
      auto row = random_simplex(rng, 2);
      pi.probs(s, 0) = row[0];
      pi.probs(s, 1) = row[1];
    }
    const QVec cur = bellman_q(mdp, pi, q);
    REQUIRE((best - cur).minCoeff() >= -1e-12);
  }
}

TEST_CASE("policy distance helper is the max row deviation", "[mdp]") {
  Policy a = uniform_policy(2, 2);
  Policy b = a;
  b.probs(1, 0) = 0.8;
  b.probs(1, 1) = 0.2;
  REQUIRE_THAT(policy_inf_distance(a, b),
               Catch::Matchers::WithinAbs(0.3, 1e-15));
}

TEST_CASE("split-stream generator is stable and decoupled", "[mdp]") {
  SplitRng a(42, 0);
  SplitRng b(42, 0);
  for (int i = 0; i < 100; ++i) REQUIRE(a.next_u64() == b.next_u64());
  SplitRng c(42, 1);
  bool any_diff = false;
  SplitRng a2(42, 0);
  for (int i = 0; i < 100; ++i) {
    if (a2.next_u64() != c.next_u64()) any_diff = true;
  }
  REQUIRE(any_diff);
  // doubles live in [0, 1)
  SplitRng d(7, 3);
  for (int i = 0; i < 1000; ++i) {
    const double x = d.next_double();
    REQUIRE(x >= 0.0);
    REQUIRE(x < 1.0);
  }
  // categorical respects the support
  const double w[3] = {0.2, 0.5, 0.3};
  for (int i = 0; i < 300; ++i) {
    const int k = d.categorical(w, 3);
    REQUIRE(k >= 0);
    REQUIRE(k <= 2);
  }
  REQUIRE(d.draws() == 1300);
}

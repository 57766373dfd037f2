#pragma once

#include <utility>
#include <vector>

#include "errors.hpp"
#include "mdp.hpp"
#include "mirror.hpp"

namespace pmdlab {

/// Output of the planning solver: optimal tables, the greedy policy that
/// attains them, and convergence diagnostics.
struct OptimalSolution {
  QVec q_star;
  VVec v_star;
  Policy pi_star;  ///< greedy in q_star, lowest index on ties
  double residual = 0.0;
  int iterations = 0;
};

/**
 * Value iteration from the zero table.  The sup-norm change between sweeps
 * is driven below tol * (1-gamma) / (2*gamma) (or to exactly zero when
 * gamma = 0), which guarantees the returned table is within tol of the true
 * optimum in the sup norm.
 */
inline OptimalSolution value_iteration(const TabularMdp& mdp,
                                       double tol = 1e-10) {
  if (!(tol > 0.0)) throw ValidationError("value_iteration: tol must be > 0");
  const double threshold =
      mdp.gamma > 0.0 ? tol * (1.0 - mdp.gamma) / (2.0 * mdp.gamma) : 0.0;
  OptimalSolution sol;
  QVec q = QVec::Zero(mdp.num_states * mdp.num_actions);
  double res = 0.0;
  int iters = 0;
  for (;;) {
    QVec next = optimal_bellman_q(mdp, q);
    res = (next - q).lpNorm<Eigen::Infinity>();
    q = std::move(next);
    ++iters;
    if (res <= threshold) break;
  }
  sol.q_star = q;
  sol.v_star = max_state_values(q, mdp.num_states, mdp.num_actions);
  sol.pi_star = greedy_policy(q, mdp.num_states, mdp.num_actions);
  sol.residual = res;
  sol.iterations = iters;
  return sol;
}

/// One entry of a policy-iteration-style trajectory: the policy in force at
/// step k and the critic table associated with it.
struct PmdIterate {
  Policy pi;
  QVec q;
};

/**
 * Idealized mirror-ascent policy iteration with an exact critic: at every
 * step the current policy is evaluated exactly and each state row moves
 * through one regularized improvement step with step size eta.  Returns the
 * K+1 iterates (pi_k, Q^{pi_k}) for k = 0..K.
 */
inline std::vector<PmdIterate> exact_pmd(const TabularMdp& mdp,
                                         const MirrorMap& map,
                                         const Policy& pi0, double eta,
                                         int num_steps) {
  if (num_steps < 0) throw ValidationError("exact_pmd: num_steps must be >= 0");
  validate_policy(pi0, mdp.num_states, mdp.num_actions, "initial policy");
  std::vector<PmdIterate> out;
  out.reserve(static_cast<std::size_t>(num_steps) + 1);
  Policy pi = pi0;
  for (int k = 0; k <= num_steps; ++k) {
    const auto [v, q] = policy_value(mdp, pi);
    out.push_back(PmdIterate{pi, q});
    if (k < num_steps) pi = pmd_step_policy(map, pi, q, eta);
  }
  return out;
}

/**
 * Deterministic actor-critic recursion with a stale critic: the critic
 * starts at zero and is refreshed by one full backup under the newly
 * improved policy each step (Q^{k+1} = backup of Q^k under pi_{k+1}), while
 * the actor moves through a regularized improvement step against the current
 * critic.  Returns the K+1 iterates (pi_k, Q^k) for k = 0..K.
 */
inline std::vector<PmdIterate> exact_td_pmd(const TabularMdp& mdp,
                                            const MirrorMap& map,
                                            const Policy& pi0, double eta,
                                            int num_steps) {
  if (num_steps < 0) {
    throw ValidationError("exact_td_pmd: num_steps must be >= 0");
  }
  validate_policy(pi0, mdp.num_states, mdp.num_actions, "initial policy");
  std::vector<PmdIterate> out;
  out.reserve(static_cast<std::size_t>(num_steps) + 1);
  Policy pi = pi0;
  QVec q = QVec::Zero(mdp.num_states * mdp.num_actions);
  out.push_back(PmdIterate{pi, q});
  for (int k = 0; k < num_steps; ++k) {
    const Policy pi_next = pmd_step_policy(map, pi, q, eta);
    q = bellman_q(mdp, pi_next, q);
    pi = pi_next;
    out.push_back(PmdIterate{pi, q});
  }
  return out;
}

}  // namespace pmdlab

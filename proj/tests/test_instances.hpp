#pragma once

// Fixed instances shared across the unit-test suite, small enough to list
// inline.  Expected numbers quoted next to them were produced by independent
// reference computations and are frozen: do not regenerate casually.

#include <pmdlab/pmdlab.hpp>

namespace testutil {

using namespace pmdlab;

/// 3-state / 2-action chain used for evaluation cross-checks.
/// Reference truncated-rollout values (gamma = 0.9, T = 500, truncation
/// error below 1e-22):
///   V_T = (6.0649622594733108, 6.1243588742780268, 5.4924420295387568)
///   Q_T = (6.4176306034967183, 5.5359597434381973, 5.7683958367468131,
///          6.2430132201217665, 5.3306140481057724, 5.6542700109717376)
inline TabularMdp eval_mdp() {
  TabularMdp mdp;
  mdp.num_states = 3;
  mdp.num_actions = 2;
  mdp.gamma = 0.9;
  mdp.transitions.resize(6, 3);
  mdp.transitions << 0.7, 0.2, 0.1,  //
      0.1, 0.6, 0.3,                 //
      0.3, 0.3, 0.4,                 //
      0.5, 0.25, 0.25,               //
      0.2, 0.5, 0.3,                 //
      0.05, 0.15, 0.8;
  mdp.rewards.resize(3, 2);
  mdp.rewards << 1.0, 0.2, 0.5, 0.9, 0.0, 0.6;
  validate_mdp(mdp);
  return mdp;
}

inline Policy eval_policy() {
  Policy pi;
  pi.probs.resize(3, 2);
  pi.probs << 0.6, 0.4, 0.25, 0.75, 0.5, 0.5;
  return pi;
}

/// 2-state / 2-action instance for the discounted visitation identity.
/// Reference truncated-series value (gamma = 0.8, T = 500, start (0.6, 0.4)):
///   d = (0.62837837837837807, 0.37162162162162166)
inline TabularMdp visit_mdp() {
  TabularMdp mdp;
  mdp.num_states = 2;
  mdp.num_actions = 2;
  mdp.gamma = 0.8;
  mdp.transitions.resize(4, 2);
  mdp.transitions << 0.8, 0.2,  //
      0.3, 0.7,                 //
      0.5, 0.5,                 //
      0.9, 0.1;
  mdp.rewards.resize(2, 2);
  mdp.rewards << 0.4, 0.1, 0.7, 0.2;
  validate_mdp(mdp);
  return mdp;
}

inline Policy visit_policy() {
  Policy pi;
  pi.probs.resize(2, 2);
  pi.probs << 0.5, 0.5, 0.3, 0.7;
  return pi;
}

/// One-state instance with a near-deterministic behavior policy; with a
/// critic relaxation factor above 1 the update overshoots the admissible
/// value interval on the rarely sampled action.
inline TabularMdp overshoot_mdp() {
  TabularMdp mdp;
  mdp.num_states = 1;
  mdp.num_actions = 2;
  mdp.gamma = 0.9;
  mdp.transitions.resize(2, 1);
  mdp.transitions << 1.0, 1.0;
  mdp.rewards.resize(1, 2);
  mdp.rewards << 1.0, 0.99;
  validate_mdp(mdp);
  return mdp;
}

inline Policy overshoot_behavior() {
  Policy pi;
  pi.probs.resize(1, 2);
  pi.probs << 0.98, 0.02;
  return pi;
}

/// Deterministic two-cycle: irreducible but periodic, so it has no
/// convergent state distribution under the uniform policy.
inline TabularMdp periodic_mdp() {
  TabularMdp mdp;
  mdp.num_states = 2;
  mdp.num_actions = 1;
  mdp.gamma = 0.9;
  mdp.transitions.resize(2, 2);
  mdp.transitions << 0.0, 1.0, 1.0, 0.0;
  mdp.rewards.resize(2, 1);
  mdp.rewards << 0.5, 0.5;
  validate_mdp(mdp);
  return mdp;
}

inline AlgoConfig base_config(AlgoKind kind, MirrorMap map, int iterations,
                              long long batch, std::uint64_t seed) {
  AlgoConfig cfg;
  cfg.kind = kind;
  cfg.map = map;
  cfg.num_iterations = iterations;
  cfg.alpha = 1.0;
  cfg.eta_mode = EtaMode::Constant;
  cfg.eta_base = 1.0;
  cfg.batches = BatchSchedule::constant(batch);
  cfg.theta = 1.0;
  cfg.seed = seed;
  return cfg;
}

}  // namespace testutil

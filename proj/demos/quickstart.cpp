// Minimal tour: generate an instance, solve it exactly, run the sampled
// actor-critic loop, and watch the policy close the gap to optimal.
#include <cstdio>

#include <pmdlab/pmdlab.hpp>

int main() {
  using namespace pmdlab;

  GarnetSpec spec;
  spec.num_states = 8;
  spec.num_actions = 4;
  spec.branching = 3;
  spec.gamma = 0.9;
  spec.seed = 7;
  const TabularMdp mdp = gen_garnet(spec);
  const OptimalSolution sol = value_iteration(mdp);
  std::printf("instance: %d states, %d actions, gamma %.2f\n", mdp.num_states,
              mdp.num_actions, mdp.gamma);
  std::printf("optimal value at state 0: %.6f (%d sweeps)\n", sol.v_star(0),
              sol.iterations);

  const Policy pi_b = uniform_policy(mdp.num_states, mdp.num_actions);
  const BehaviorModel behavior = make_behavior(mdp, pi_b);

  AlgoConfig cfg;
  cfg.kind = AlgoKind::Expected;
  cfg.map = MirrorMap::negative_entropy();
  cfg.num_iterations = 300;
  cfg.alpha = 1.0;
  cfg.eta_mode = EtaMode::Constant;
  cfg.eta_base = 1.0;
  cfg.batches = BatchSchedule::constant(64);
  cfg.theta = 1.0;
  cfg.seed = 42;

  SplitRng rng(cfg.seed, 0);
  const RunResult run = run_expected_td_pmd(mdp, behavior, cfg, rng);

  std::printf("\n%6s  %12s  %12s\n", "k", "subopt_V", "critic_gap");
  for (int k = 0; k <= cfg.num_iterations; k += 60) {
    const IterationRecord& rec = run.trace[static_cast<std::size_t>(k)];
    const auto [v_pi, q_pi] = policy_value(mdp, rec.pi_k);
    const double subopt = (sol.v_star - v_pi).lpNorm<Eigen::Infinity>();
    const double critic = (q_pi - rec.q_k).lpNorm<Eigen::Infinity>();
    std::printf("%6d  %12.6f  %12.6f\n", k, subopt, critic);
  }
  const auto [v_final, q_final] = policy_value(mdp, run.final_pi);
  std::printf("\nfinal policy suboptimality: %.3e after %lld samples\n",
              (sol.v_star - v_final).lpNorm<Eigen::Infinity>(),
              run.total_samples);
  return 0;
}

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

#include "algo.hpp"
#include "analysis.hpp"
#include "chain.hpp"
#include "errors.hpp"
#include "mdp.hpp"
#include "mirror.hpp"
#include "oracle.hpp"
#include "rng.hpp"

namespace pmdlab {

/// Shape of a randomly generated sparse-transition instance.
struct GarnetSpec {
  int num_states = 6;
  int num_actions = 3;
  int branching = 3;  ///< number of reachable next states per (s, a)
  std::uint64_t seed = 1;
  double gamma = 0.9;
};

/**
 * Deterministic sparse random instance: every (s, a) reaches exactly
 * `branching` distinct next states (chosen by a partial shuffle) with
 * probabilities given by sorted uniform spacings, and rewards are uniform
 * on [0, 1].  The same spec always produces bitwise identical tables.
 */
inline TabularMdp gen_garnet(const GarnetSpec& spec) {
  if (spec.num_states < 1) {
    throw ValidationError("gen_garnet: num_states must be >= 1");
  }
  if (spec.num_actions < 1) {
    throw ValidationError("gen_garnet: num_actions must be >= 1");
  }
  if (spec.branching < 1 || spec.branching > spec.num_states) {
    throw ValidationError(
        "gen_garnet: branching must lie in [1, num_states]");
  }
  if (!(spec.gamma >= 0.0 && spec.gamma < 1.0)) {
    throw ValidationError("gen_garnet: gamma must lie in [0, 1)");
  }
  const int S = spec.num_states;
  const int A = spec.num_actions;
  const int b = spec.branching;
  SplitRng rng(spec.seed, 0);

  TabularMdp mdp;
  mdp.num_states = S;
  mdp.num_actions = A;
  mdp.gamma = spec.gamma;
  mdp.transitions = Matrix::Zero(S * A, S);
  mdp.rewards.resize(S, A);

  std::vector<int> pool(static_cast<std::size_t>(S));
  std::vector<double> cuts(static_cast<std::size_t>(b) + 1);
  for (int s = 0; s < S; ++s) {
    for (int a = 0; a < A; ++a) {
      std::iota(pool.begin(), pool.end(), 0);
      for (int i = 0; i < b; ++i) {
        const int j = i + rng.uniform_int(S - i);
        std::swap(pool[static_cast<std::size_t>(i)],
                  pool[static_cast<std::size_t>(j)]);
      }
      cuts.front() = 0.0;
      cuts.back() = 1.0;
      for (int i = 1; i < b; ++i) {
        cuts[static_cast<std::size_t>(i)] = rng.next_double();
      }
      std::sort(cuts.begin() + 1, cuts.end() - 1);
      const int row = mdp.idx(s, a);
      for (int i = 0; i < b; ++i) {
        mdp.transitions(row, pool[static_cast<std::size_t>(i)]) =
            cuts[static_cast<std::size_t>(i) + 1] -
            cuts[static_cast<std::size_t>(i)];
      }
    }
  }
  for (int s = 0; s < S; ++s) {
    for (int a = 0; a < A; ++a) {
      mdp.rewards(s, a) = rng.next_double();
    }
  }
  validate_mdp(mdp);
  return mdp;
}

/// One line of the invariant report.
struct PropertyCheck {
  std::string lemma;  ///< short name of the invariant being checked
  bool pass = false;
  double measured = 0.0;
  double bound = 0.0;
};

struct PropertyReport {
  std::vector<PropertyCheck> checks;
  bool all_pass() const {
    for (const PropertyCheck& c : checks) {
      if (!c.pass) return false;
    }
    return true;
  }
};

namespace detail {

inline Policy random_policy(SplitRng& rng, int S, int A) {
  Policy pi;
  pi.probs.resize(S, A);
  for (int s = 0; s < S; ++s) {
    const std::vector<double> row = random_simplex(rng, A);
    for (int a = 0; a < A; ++a) pi.probs(s, a) = row[static_cast<std::size_t>(a)];
  }
  return pi;
}

inline QVec random_q(SplitRng& rng, int n, double lo, double hi) {
  QVec q(n);
  for (int i = 0; i < n; ++i) q(i) = lo + (hi - lo) * rng.next_double();
  return q;
}

inline Vector to_vector(const std::vector<double>& x) {
  Vector v(static_cast<Eigen::Index>(x.size()));
  for (std::size_t i = 0; i < x.size(); ++i) {
    v(static_cast<Eigen::Index>(i)) = x[i];
  }
  return v;
}

}  // namespace detail

/**
 * Runs every module's invariants at desk scale on one instance and reports
 * one named line per invariant with the measured quantity and the bound it
 * must stay below.  `alpha` feeds only the critic-range check, so that
 * out-of-range step sizes demonstrably break it; every other check runs
 * with safe fixed parameters.
 */
inline PropertyReport run_property_suite(const TabularMdp& mdp,
                                         const Policy& pi_b,
                                         const MirrorMap& map,
                                         const std::vector<std::uint64_t>& seeds,
                                         double alpha = 1.0) {
  validate_mdp(mdp);
  validate_policy(pi_b, mdp.num_states, mdp.num_actions, "behavior policy");
  if (seeds.empty()) {
    throw ValidationError("run_property_suite: provide at least one seed");
  }
  const int S = mdp.num_states;
  const int A = mdp.num_actions;
  const int SA = S * A;
  const double gamma = mdp.gamma;
  const double g = 1.0 - gamma;
  const double cap = 1.0 / g;
  const BehaviorModel behavior = make_behavior(mdp, pi_b);
  const OptimalSolution sol = value_iteration(mdp, 1e-12);
  const StateDist mu = StateDist::Constant(S, 1.0 / static_cast<double>(S));

  PropertyReport report;
  auto emit = [&report](const std::string& name, double measured,
                        double bound) {
    report.checks.push_back(
        PropertyCheck{name, measured <= bound, measured, bound});
  };

  // --- one-step backup contractions -------------------------------------
  {
    SplitRng rng(seeds[0], 101);
    double worst_pi = 0.0, worst_greedy = 0.0, worst_weighted = 0.0;
    const double safe_alpha = 0.9;
    for (int trial = 0; trial < 200; ++trial) {
      const Policy pi = detail::random_policy(rng, S, A);
      const QVec q1 = detail::random_q(rng, SA, -5.0, 15.0);
      const QVec q2 = detail::random_q(rng, SA, -5.0, 15.0);
      const double dist = (q1 - q2).lpNorm<Eigen::Infinity>();
      if (dist == 0.0) continue;
      worst_pi = std::max(
          worst_pi, (bellman_q(mdp, pi, q1) - bellman_q(mdp, pi, q2))
                            .lpNorm<Eigen::Infinity>() /
                        dist);
      worst_greedy = std::max(
          worst_greedy,
          (optimal_bellman_q(mdp, q1) - optimal_bellman_q(mdp, q2))
                  .lpNorm<Eigen::Infinity>() /
              dist);
      worst_weighted = std::max(
          worst_weighted,
          (weighted_bellman(mdp, pi, behavior, safe_alpha, q1) -
           weighted_bellman(mdp, pi, behavior, safe_alpha, q2))
                  .lpNorm<Eigen::Infinity>() /
              dist);
    }
    emit("backup-contraction", worst_pi, gamma + 1e-12);
    emit("greedy-backup-contraction", worst_greedy, gamma + 1e-12);
    emit("weighted-backup-contraction", worst_weighted,
         contraction_rho(safe_alpha, gamma, behavior.sigma_floor) + 1e-12);
  }

  // --- exact evaluation: range, dominance, residuals, visitation ---------
  {
    SplitRng rng(seeds[0], 102);
    double excursion = 0.0, dominance = 0.0, residual = 0.0, defect = 0.0;
    for (int trial = 0; trial < 20; ++trial) {
      const Policy pi = detail::random_policy(rng, S, A);
      const auto [v, q] = policy_value(mdp, pi);
      excursion = std::max({excursion, -v.minCoeff(), v.maxCoeff() - cap,
                            -q.minCoeff(), q.maxCoeff() - cap});
      dominance = std::max(dominance, (v - sol.v_star).maxCoeff());
      residual = std::max(
          residual, (bellman_v(mdp, pi, v) - v).lpNorm<Eigen::Infinity>());
      residual = std::max(
          residual, (bellman_q(mdp, pi, q) - q).lpNorm<Eigen::Infinity>());
      if (trial < 5) {
        const Policy other = detail::random_policy(rng, S, A);
        const auto [v_other, q_other] = policy_value(mdp, other);
        const StateDist mu_rand =
            detail::to_vector(random_simplex(rng, S));
        defect = std::max(defect, perf_diff_check(mdp, pi, v_other, mu_rand));
      }
    }
    emit("value-range", excursion, 1e-9);
    emit("optimal-dominance", dominance, 1e-9);
    emit("evaluation-residual", residual, 1e-10);
    emit("visitation-identity", defect, 1e-9);
  }

  // --- mirror-map geometry ----------------------------------------------
  {
    SplitRng rng(seeds[0], 103);
    double convexity_gap = 0.0;
    for (int trial = 0; trial < 300; ++trial) {
      const Vector p = detail::to_vector(random_simplex(rng, A));
      const Vector q = detail::to_vector(random_simplex(rng, A));
      const double d = bregman(map, p, q);
      const double norm =
          map.norm_p == 1 ? (p - q).lpNorm<1>() : (p - q).lpNorm<2>();
      convexity_gap =
          std::max(convexity_gap, 0.5 * map.lambda * norm * norm - d);
    }
    emit("divergence-convexity", convexity_gap, 1e-12);

    double descent_violation = 0.0;
    double step_excess = 0.0;
    const double etas[] = {0.05, 0.5, 5.0};
    for (int trial = 0; trial < 100; ++trial) {
      const Vector pi_row = detail::to_vector(random_simplex(rng, A));
      const QVec q_row = detail::random_q(rng, A, 0.0, cap);
      const double eta = etas[trial % 3];
      const Vector stepped = pmd_step(map, pi_row, q_row, eta);
      for (int c = 0; c < 5; ++c) {
        Vector p;
        if (c == 0) {
          p = Vector::Zero(A);
          int best = 0;
          for (int a = 1; a < A; ++a) {
            if (q_row(a) > q_row(best)) best = a;
          }
          p(best) = 1.0;
        } else {
          p = detail::to_vector(random_simplex(rng, A));
        }
        const double slack = eta * (stepped - p).dot(q_row) + bregman(map, p, pi_row) -
                             bregman(map, stepped, pi_row) -
                             bregman(map, p, stepped);
        descent_violation = std::max(descent_violation, -slack);
      }
      step_excess = std::max(
          step_excess, (stepped - pi_row).lpNorm<Eigen::Infinity>() -
                           (eta / map.lambda) * q_row.lpNorm<1>());
    }
    emit("three-point-descent", descent_violation, 1e-9);
    emit("update-step-bound", step_excess, 1e-12);

    double proj_violation = 0.0;
    for (int trial = 0; trial < 200; ++trial) {
      const QVec v = detail::random_q(rng, A, -3.0, 3.0);
      const QVec w = detail::random_q(rng, A, -3.0, 3.0);
      const Vector pv = project_simplex(v);
      const Vector pw = project_simplex(w);
      proj_violation = std::max(proj_violation, -pv.minCoeff());
      proj_violation = std::max(proj_violation, std::abs(pv.sum() - 1.0));
      proj_violation = std::max(
          proj_violation, (project_simplex(pv) - pv).lpNorm<Eigen::Infinity>());
      proj_violation = std::max(
          proj_violation, (pv - pw).lpNorm<2>() - (v - w).lpNorm<2>());
      const Vector on_simplex = detail::to_vector(random_simplex(rng, A));
      proj_violation = std::max(
          proj_violation,
          (project_simplex(on_simplex) - on_simplex).lpNorm<Eigen::Infinity>());
    }
    emit("projection-properties", proj_violation, 1e-12);
  }

  // --- exact actor recursions -------------------------------------------
  {
    const Policy pi0 = uniform_policy(S, A);
    const auto iterates = exact_pmd(mdp, map, pi0, 1.0, 30);
    double regress = 0.0;
    for (std::size_t k = 0; k + 1 < iterates.size(); ++k) {
      const VVec v_k = policy_state_values(iterates[k].pi, iterates[k].q);
      const VVec v_next =
          policy_state_values(iterates[k + 1].pi, iterates[k + 1].q);
      regress = std::max(regress, (v_k - v_next).maxCoeff());
    }
    emit("mirror-improvement", regress, 1e-10);

    const int K = 150;
    const double eta = 0.5;
    const auto avg_run = exact_pmd(mdp, map, pi0, eta, K);
    double avg_gap = 0.0;
    for (const PmdIterate& it : avg_run) {
      const VVec v_it = policy_state_values(it.pi, it.q);
      avg_gap += mu.dot(sol.v_star - v_it);
    }
    avg_gap /= static_cast<double>(K + 1);
    double d0 = 0.0;
    for (int s = 0; s < S; ++s) {
      d0 = std::max(d0, bregman(map, sol.pi_star.probs.row(s).transpose(),
                                pi0.probs.row(s).transpose()));
    }
    emit("average-iterate-bound", avg_gap,
         (d0 / (eta * g) + 1.0 / (g * g)) / static_cast<double>(K + 1) + 1e-9);
  }

  // --- planner decay -----------------------------------------------------
  {
    QVec q = QVec::Zero(SA);
    const double err0 = (sol.q_star - q).lpNorm<Eigen::Infinity>();
    double worst_ratio = 0.0;
    double scale = 1.0;
    for (int t = 0; t <= 60; ++t) {
      const double err = (sol.q_star - q).lpNorm<Eigen::Infinity>();
      if (err0 * scale > 1e-14) {
        worst_ratio = std::max(worst_ratio, err / (err0 * scale));
      }
      q = optimal_bellman_q(mdp, q);
      scale *= gamma;
    }
    emit("planner-decay", worst_ratio, 1.0 + 1e-9);
  }

  // --- greedy equivalence of the Euclidean update ------------------------
  {
    AlgoConfig cfg;
    cfg.kind = AlgoKind::Expected;
    cfg.map = MirrorMap::squared_l2();
    cfg.num_iterations = 40;
    cfg.alpha = 0.9;
    cfg.eta_mode = EtaMode::QlearningEquiv;
    cfg.eta_base = 1e-6;
    cfg.batches = BatchSchedule::constant(8);
    cfg.trace_mode = TraceMode::Full;
    SplitRng rng_a(seeds[0], 104);
    const RunResult actor_run = run_expected_td_pmd(mdp, behavior, cfg, rng_a);
    AlgoConfig cfg_q = cfg;
    cfg_q.kind = AlgoKind::BatchQ;
    SplitRng rng_b(seeds[0], 104);
    const RunResult greedy_run = run_batch_q_learning(mdp, behavior, cfg_q, rng_b);
    double mismatch = 0.0;
    for (int k = 0; k < cfg.num_iterations; ++k) {
      mismatch = std::max(
          mismatch,
          (actor_run.trace[static_cast<std::size_t>(k)].q_k -
           greedy_run.trace[static_cast<std::size_t>(k)].q_k)
              .lpNorm<Eigen::Infinity>());
    }
    mismatch = std::max(
        mismatch,
        (actor_run.trace.back().q_k - greedy_run.final_q).lpNorm<Eigen::Infinity>());
    for (int k = 0; k + 1 <= cfg.num_iterations; ++k) {
      const QVec& q_k = actor_run.trace[static_cast<std::size_t>(k)].q_k;
      const Policy& pi_next =
          actor_run.trace[static_cast<std::size_t>(k) + 1].pi_k;
      for (int s = 0; s < S; ++s) {
        const double* qrow = q_k.data() + s * A;
        double best = qrow[0];
        for (int a = 1; a < A; ++a) best = std::max(best, qrow[a]);
        for (int a = 0; a < A; ++a) {
          if (qrow[a] < best) {
            mismatch = std::max(mismatch, pi_next.probs(s, a));
          }
        }
      }
    }
    emit("greedy-equivalence", mismatch, 0.0);
  }

  // --- critic range under the configured alpha ---------------------------
  {
    double excursion = 0.0;
    const std::size_t n_seeds = std::min<std::size_t>(seeds.size(), 4);
    for (std::size_t i = 0; i < n_seeds; ++i) {
      for (const AlgoKind kind :
           {AlgoKind::Expected, AlgoKind::Approximate, AlgoKind::BatchQ}) {
        AlgoConfig cfg;
        cfg.kind = kind;
        cfg.map = map.kind == MirrorKind::NegativeEntropy
                      ? MirrorMap::negative_entropy()
                      : MirrorMap::squared_l2();
        cfg.num_iterations = 200;
        cfg.alpha = alpha;
        cfg.allow_alpha_out_of_range = alpha > 1.0;
        cfg.eta_mode = EtaMode::Constant;
        cfg.eta_base = 1.0;
        cfg.batches = BatchSchedule::constant(1);
        cfg.trace_mode = TraceMode::Light;
        SplitRng rng(seeds[i], 105 + static_cast<std::uint64_t>(kind));
        RunResult run;
        switch (kind) {
          case AlgoKind::Expected:
            run = run_expected_td_pmd(mdp, behavior, cfg, rng);
            break;
          case AlgoKind::Approximate:
            run = run_approximate_td_pmd(mdp, pi_b, cfg, rng);
            break;
          default:
            run = run_batch_q_learning(mdp, behavior, cfg, rng);
            break;
        }
        excursion = std::max(
            {excursion, -run.q_min_seen, run.q_max_seen - cap});
      }
    }
    emit("critic-range", excursion, 1e-9);
  }

  // --- sampled-update identities and noise level -------------------------
  {
    AlgoConfig cfg;
    cfg.kind = AlgoKind::Expected;
    cfg.map = MirrorMap::negative_entropy();
    cfg.num_iterations = 20;
    cfg.alpha = 0.9;
    cfg.eta_mode = EtaMode::Constant;
    cfg.eta_base = 1.0;
    cfg.batches = BatchSchedule::constant(8);
    cfg.trace_mode = TraceMode::Full;
    SplitRng rng_e(seeds[0], 107);
    const RunResult exp_run = run_expected_td_pmd(mdp, behavior, cfg, rng_e);
    AlgoConfig cfg_m = cfg;
    cfg_m.kind = AlgoKind::Approximate;
    SplitRng rng_m(seeds[0], 108);
    const RunResult mix_run = run_approximate_td_pmd(mdp, pi_b, cfg_m, rng_m);

    double identity = 0.0;
    double level = 0.0;
    auto probe_run = [&](const RunResult& run) {
      for (std::size_t k = 0; k + 1 < run.trace.size(); ++k) {
        const IterationRecord& rec = run.trace[k];
        const Policy& pi_next = run.trace[k + 1].pi_k;
        const StateActionDist& sigma =
            rec.sigma_k.size() ? rec.sigma_k : behavior.sigma;
        const QVec mean =
            weighted_bellman(mdp, pi_next, sigma, 1.0, rec.q_k) - rec.q_k;
        identity = std::max(identity, (rec.delta_bar - rec.omega_bar - mean)
                                          .lpNorm<Eigen::Infinity>());
        level = std::max(level, rec.omega_bar.lpNorm<Eigen::Infinity>());
      }
    };
    probe_run(exp_run);
    probe_run(mix_run);
    emit("noise-mean-identity", identity, 1e-12);
    emit("noise-range", level, 2.0 / g + 1e-12);

    // Per-step critic-error recursion and actor recovery along the
    // off-policy run.
    const double rho_b = contraction_rho(cfg.alpha, gamma, behavior.sigma_floor);
    double recursion_excess = 0.0;
    double recovery_excess = 0.0;
    for (std::size_t k = 0; k + 1 < exp_run.trace.size(); ++k) {
      const IterationRecord& rec = exp_run.trace[k];
      const QVec& q_next = exp_run.trace[k + 1].q_k;
      const Policy tilde = greedy_policy(rec.q_k, S, A);
      double div = 0.0;
      for (int s = 0; s < S; ++s) {
        div = std::max(div, bregman(cfg.map, tilde.probs.row(s).transpose(),
                                    rec.pi_k.probs.row(s).transpose()));
      }
      const double err_k = (sol.q_star - rec.q_k).lpNorm<Eigen::Infinity>();
      const double err_next = (sol.q_star - q_next).lpNorm<Eigen::Infinity>();
      const double omega_inf = rec.omega_bar.lpNorm<Eigen::Infinity>();
      recursion_excess = std::max(
          recursion_excess,
          err_next - (rho_b * err_k + cfg.alpha * gamma / rec.eta_k * div +
                      cfg.alpha * omega_inf));
      const auto [v_next, q_pi_next] =
          policy_value(mdp, exp_run.trace[k + 1].pi_k);
      recovery_excess = std::max(
          recovery_excess,
          (sol.q_star - q_pi_next).lpNorm<Eigen::Infinity>() -
              (err_next + err_k + cfg.alpha * omega_inf) /
                  (cfg.alpha * g * behavior.sigma_floor));
    }
    emit("critic-error-recursion", recursion_excess, 1e-9);
    emit("actor-recovery", recovery_excess, 1e-9);
  }

  // --- averaged-noise moment across seeds --------------------------------
  {
    const BoundInputs inputs = extract_constants(
        mdp, behavior, map, uniform_policy(S, A), sol.pi_star, 1.0);
    const double c1 = noise_moment_constant(inputs);
    for (const long long b : {16LL, 64LL}) {
      AlgoConfig cfg;
      cfg.kind = AlgoKind::Expected;
      cfg.map = MirrorMap::negative_entropy();
      cfg.num_iterations = 12;
      cfg.alpha = 1.0;
      cfg.eta_mode = EtaMode::Constant;
      cfg.eta_base = 1.0;
      cfg.batches = BatchSchedule::constant(b);
      cfg.trace_mode = TraceMode::Full;
      std::vector<double> mean_by_k(13, 0.0);
      for (std::size_t i = 0; i < seeds.size(); ++i) {
        SplitRng rng(seeds[i], 109 + static_cast<std::uint64_t>(b));
        const RunResult run = run_expected_td_pmd(mdp, behavior, cfg, rng);
        for (std::size_t k = 0; k < run.trace.size(); ++k) {
          mean_by_k[k] += run.trace[k].omega_bar.lpNorm<Eigen::Infinity>();
        }
      }
      double worst = 0.0;
      for (double& v : mean_by_k) {
        v /= static_cast<double>(seeds.size());
        worst = std::max(worst, v);
      }
      emit("noise-moment-b" + std::to_string(b), worst,
           c1 / std::sqrt(static_cast<double>(b)));
    }
  }

  // --- pathwise gap decomposition and drift-term budgets ------------------
  {
    AlgoConfig cfg;
    cfg.kind = AlgoKind::Expected;
    cfg.map = map.kind == MirrorKind::NegativeEntropy
                  ? MirrorMap::negative_entropy()
                  : MirrorMap::squared_l2();
    cfg.num_iterations = 10;
    cfg.alpha = 0.9;
    cfg.eta_mode = EtaMode::Constant;
    cfg.eta_base = 0.7;
    cfg.batches = BatchSchedule::constant(4);
    cfg.trace_mode = TraceMode::Full;
    SplitRng rng_e(seeds[0], 111);
    const RunResult exp_run = run_expected_td_pmd(mdp, behavior, cfg, rng_e);
    AlgoConfig cfg_m = cfg;
    cfg_m.kind = AlgoKind::Approximate;
    SplitRng rng_m(seeds[0], 112);
    const RunResult mix_run = run_approximate_td_pmd(mdp, pi_b, cfg_m, rng_m);

    double worst_residual = 0.0;
    double worst_c = 0.0, worst_d = 0.0, worst_e = 0.0;
    SplitRng probe_rng(seeds[0], 113);
    for (int probe = 0; probe < 3; ++probe) {
      const int state = probe_rng.uniform_int(S);
      const int upto = 2 + probe_rng.uniform_int(cfg.num_iterations - 1);
      for (const RunResult* run : {&exp_run, &mix_run}) {
        const BiasDecomposition dec =
            bias_decomposition(mdp, *run, behavior, sol.pi_star, state, upto);
        worst_residual = std::max(
            worst_residual, dec.residual / (1.0 + std::abs(dec.lhs)));
        if (run == &exp_run) {
          double sum_c = 0.0, sum_d = 0.0, sum_e = 0.0;
          for (double x : dec.c) sum_c += std::abs(x);
          for (double x : dec.d) sum_d += std::abs(x);
          for (double x : dec.e) sum_e += std::abs(x);
          worst_c = std::max(worst_c, sum_c);
          worst_d = std::max(worst_d, sum_d);
          worst_e = std::max(worst_e, sum_e);
        }
      }
    }
    emit("gap-telescoping", worst_residual, 1e-9);
    const double a2 = static_cast<double>(A) * static_cast<double>(A);
    const double sf = behavior.sigma_floor;
    const double eta = cfg.eta_base;
    emit("critic-drift-budget", worst_c,
         2.0 * gamma * a2 * eta /
                 (cfg.alpha * map.lambda * sf * std::pow(g, 4)) +
             1e-9);
    emit("actor-motion-budget", worst_d,
         a2 * eta / (cfg.alpha * map.lambda * sf * std::pow(g, 3)) + 1e-9);
    emit("weight-drift-budget", worst_e,
         2.0 * gamma * a2 * eta /
                 (cfg.alpha * map.lambda * sf * sf * std::pow(g, 4)) +
             1e-9);
  }

  // --- mixing envelope, stationary sensitivity, kernel shift -------------
  {
    const Matrix p_b = transition_matrix_s(mdp, pi_b);
    const MixingEstimate est = estimate_mixing(p_b, behavior.nu);
    double excess = 0.0;
    double kpow = 1.0;
    for (int t = 0; t <= est.t_max; ++t) {
      excess = std::max(
          excess, est.curve[static_cast<std::size_t>(t)] - est.m * kpow);
      kpow *= est.kappa;
    }
    emit("mixing-envelope", excess, 1e-9 * (1.0 + est.m));

    SplitRng rng(seeds[0], 114);
    double sens_excess = 0.0;
    const StateDist nu = stationary_dist(p_b);
    for (int trial = 0; trial < 5; ++trial) {
      const double beta = 0.03 * rng.next_double();
      Matrix noise(S, S);
      for (int s = 0; s < S; ++s) {
        const std::vector<double> row = random_simplex(rng, S);
        for (int sp = 0; sp < S; ++sp) {
          noise(s, sp) = row[static_cast<std::size_t>(sp)];
        }
      }
      const Matrix perturbed = (1.0 - beta) * p_b + beta * noise;
      const StateDist nu_tilde = stationary_dist(perturbed);
      const double lhs = d_tv(nu, nu_tilde);
      const double rhs =
          stationary_shift_bound(est, matrix_inf_norm(perturbed - p_b));
      sens_excess = std::max(sens_excess, lhs - rhs);
    }
    emit("stationary-sensitivity", sens_excess, 1e-8);

    double kernel_excess = 0.0;
    for (int trial = 0; trial < 20; ++trial) {
      const Policy x = detail::random_policy(rng, S, A);
      const Policy y = detail::random_policy(rng, S, A);
      const double dist = policy_inf_distance(x, y);
      kernel_excess = std::max(
          kernel_excess,
          matrix_inf_norm(transition_matrix_s(mdp, x) -
                          transition_matrix_s(mdp, y)) -
              static_cast<double>(A) * dist);
      kernel_excess = std::max(
          kernel_excess,
          matrix_inf_norm(transition_matrix_sa(mdp, x) -
                          transition_matrix_sa(mdp, y)) -
              static_cast<double>(A) * dist);
    }
    emit("kernel-shift", kernel_excess, 1e-12);
  }

  // --- sampler repeatability ---------------------------------------------
  {
    double mismatches = 0.0;
    SplitRng r1(seeds[0], 115), r2(seeds[0], 115);
    const auto [t1, end1] = sample_offpolicy(mdp, pi_b, 0, 500, r1);
    const auto [t2, end2] = sample_offpolicy(mdp, pi_b, 0, 500, r2);
    if (end1 != end2) mismatches += 1.0;
    for (std::size_t i = 0; i < t1.size(); ++i) {
      if (t1[i].s != t2[i].s || t1[i].a != t2[i].a || t1[i].r != t2[i].r ||
          t1[i].s_next != t2[i].s_next) {
        mismatches += 1.0;
      }
    }
    SplitRng r3(seeds[0], 116), r4(seeds[0], 116);
    const Policy target = uniform_policy(S, A);
    const auto [m1, mend1] = sample_mixed(mdp, pi_b, target, 0, 500, r3);
    const auto [m2, mend2] = sample_mixed(mdp, pi_b, target, 0, 500, r4);
    if (mend1 != mend2) mismatches += 1.0;
    for (std::size_t i = 0; i < m1.size(); ++i) {
      if (m1[i].s != m2[i].s || m1[i].a != m2[i].a || m1[i].r != m2[i].r ||
          m1[i].s_next != m2[i].s_next || m1[i].a_next != m2[i].a_next) {
        mismatches += 1.0;
      }
    }
    emit("sampler-repeatability", mismatches, 0.0);
  }

  // --- schedule cost scaling ---------------------------------------------
  {
    BoundInputs in;
    in.gamma = 0.8;
    in.alpha = 1.0;
    in.lambda = 1.0;
    in.num_states = S;
    in.num_actions = A;
    in.sigma_floor = 0.1;
    in.mix_m = 2.0;
    in.mix_kappa = 0.6;
    in.d0 = 1.0;
    const double eps = 0.2;
    // A small batch_scale keeps the integer schedule feasible; the exact
    // factor-of-four property of the closed-form cost is scale-free.
    const ScheduleResult coarse =
        remark_schedules(ScheduleKind::AdaptiveStep, eps, in, 1.0, 1e-9);
    const ScheduleResult fine =
        remark_schedules(ScheduleKind::AdaptiveStep, eps / 2.0, in, 1.0, 1e-9);
    emit("schedule-cost-scaling",
         std::abs(fine.total_samples_formula -
                  4.0 * coarse.total_samples_formula),
         0.0);
  }

  return report;
}

}  // namespace pmdlab

#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include "errors.hpp"
#include "mdp.hpp"
#include "rng.hpp"

namespace pmdlab {

/// Total-variation distance between two probability vectors:
/// 0.5 * ||p - q||_1.
inline double d_tv(const Vector& p, const Vector& q) {
  if (p.size() != q.size()) {
    throw ValidationError("d_tv: p and q must have equal length");
  }
  return 0.5 * (p - q).lpNorm<1>();
}

/**
 * Exact graph test for ergodicity of a stochastic matrix: the support
 * digraph must be strongly connected (forward and backward reachability
 * from state 0) and aperiodic (gcd of the positive breadth-first level
 * defects over all support edges equals 1).
 */
inline bool check_ergodicity(const Matrix& p) {
  const int n = static_cast<int>(p.rows());
  if (p.cols() != n || n < 1) {
    throw ValidationError("check_ergodicity: matrix must be square");
  }
  for (int s = 0; s < n; ++s) {
    validate_distribution(p.row(s).data(), n, kComputedProbTol,
                          "chain row " + std::to_string(s));
  }

  auto reachable = [&](bool backward) {
    std::vector<char> seen(static_cast<std::size_t>(n), 0);
    std::vector<int> stack{0};
    seen[0] = 1;
    while (!stack.empty()) {
      const int u = stack.back();
      stack.pop_back();
      for (int v = 0; v < n; ++v) {
        const double w = backward ? p(v, u) : p(u, v);
        if (w > 0.0 && !seen[static_cast<std::size_t>(v)]) {
          seen[static_cast<std::size_t>(v)] = 1;
          stack.push_back(v);
        }
      }
    }
    return seen;
  };
  const std::vector<char> fwd = reachable(false);
  const std::vector<char> bwd = reachable(true);
  for (int s = 0; s < n; ++s) {
    if (!fwd[static_cast<std::size_t>(s)] || !bwd[static_cast<std::size_t>(s)]) {
      return false;  // reducible
    }
  }

  // Breadth-first levels from state 0; every support edge (u, v) satisfies
  // level(v) <= level(u) + 1, and the chain's period is the gcd of the
  // positive defects level(u) + 1 - level(v).
  std::vector<int> level(static_cast<std::size_t>(n), -1);
  std::vector<int> queue{0};
  level[0] = 0;
  for (std::size_t head = 0; head < queue.size(); ++head) {
    const int u = queue[head];
    for (int v = 0; v < n; ++v) {
      if (p(u, v) > 0.0 && level[static_cast<std::size_t>(v)] < 0) {
        level[static_cast<std::size_t>(v)] = level[static_cast<std::size_t>(u)] + 1;
        queue.push_back(v);
      }
    }
  }
  int g = 0;
  for (int u = 0; u < n; ++u) {
    for (int v = 0; v < n; ++v) {
      if (p(u, v) > 0.0) {
        const int defect = level[static_cast<std::size_t>(u)] + 1 -
                           level[static_cast<std::size_t>(v)];
        if (defect != 0) g = std::gcd(g, defect);
      }
    }
  }
  return g == 1;
}

/**
 * Stationary distribution of an ergodic chain by left power iteration from
 * the uniform vector (always the same cold start, so results are bitwise
 * reproducible for a given matrix).  Iterates until the one-step change
 * drops to 1e-13 in the sup norm, then certifies the fixed-point residual
 * to 1e-12.  Throws NotErgodic if the chain fails the graph test or the
 * iteration does not settle within the cap.
 */
inline StateDist stationary_dist(const Matrix& p) {
  const int n = static_cast<int>(p.rows());
  if (!check_ergodicity(p)) {
    throw NotErgodic("stationary_dist: chain is reducible or periodic");
  }
  StateDist v = StateDist::Constant(n, 1.0 / static_cast<double>(n));
  constexpr long long kMaxIters = 2'000'000;
  for (long long it = 0; it < kMaxIters; ++it) {
    StateDist next = p.transpose() * v;
    const double step = (next - v).lpNorm<Eigen::Infinity>();
    v = next;
    if (step <= 1e-13) {
      const double residual =
          (p.transpose() * v - v).lpNorm<Eigen::Infinity>();
      if (residual <= 1e-12) return v;
    }
  }
  throw NotErgodic(
      "stationary_dist: power iteration failed to reach residual 1e-12 "
      "(chain mixes too slowly)");
}

/**
 * Geometric mixing envelope fitted from the worst-row total-variation curve
 * e(t) = max_s d_tv(P^t(s,.), nu) for t = 0..t_max: a decay rate kappa in
 * [1e-6, 1 - 1e-6] read off the tail of the curve (inflated by 5% for
 * safety) and a prefactor m = max(1, max_t e(t)/kappa^t), so that
 * e(t) <= m * kappa^t holds for every computed t.  The envelope is
 * certified before returning.
 */
struct MixingEstimate {
  double m = 1.0;
  double kappa = 0.5;
  int t_max = 0;
  std::vector<double> curve;  ///< e(t) for t = 0..t_max
};

inline MixingEstimate estimate_mixing(const Matrix& p, const StateDist& nu,
                                      int t_max = 200) {
  const int n = static_cast<int>(p.rows());
  if (t_max < 1) throw ValidationError("estimate_mixing: t_max must be >= 1");
  if (static_cast<int>(nu.size()) != n) {
    throw ValidationError("estimate_mixing: nu must match the chain size");
  }
  validate_distribution(nu, kComputedProbTol, "estimate_mixing nu");

  MixingEstimate est;
  est.t_max = t_max;
  est.curve.resize(static_cast<std::size_t>(t_max) + 1);
  Matrix power = Matrix::Identity(n, n);
  for (int t = 0; t <= t_max; ++t) {
    double worst = 0.0;
    for (int s = 0; s < n; ++s) {
      worst = std::max(worst, d_tv(power.row(s).transpose(), nu));
    }
    est.curve[static_cast<std::size_t>(t)] = worst;
    if (t < t_max) power = power * p;
  }

  double kappa_raw = 0.0;
  for (int t = std::max(1, t_max / 2); t <= t_max; ++t) {
    const double e = est.curve[static_cast<std::size_t>(t)];
    if (e > 0.0) {
      kappa_raw = std::max(kappa_raw, std::pow(e, 1.0 / static_cast<double>(t)));
    }
  }
  est.kappa = std::clamp(1.05 * kappa_raw, 1e-6, 1.0 - 1e-6);

  double m = 1.0;
  double kpow = 1.0;
  for (int t = 0; t <= t_max; ++t) {
    m = std::max(m, est.curve[static_cast<std::size_t>(t)] / kpow);
    kpow *= est.kappa;
  }
  est.m = m;

  kpow = 1.0;
  for (int t = 0; t <= t_max; ++t) {
    if (est.curve[static_cast<std::size_t>(t)] >
        est.m * kpow + 1e-9 * (1.0 + est.m)) {
      throw std::runtime_error(
          "estimate_mixing: fitted envelope fails to cover the curve "
          "(internal fault)");
    }
    kpow *= est.kappa;
  }
  return est;
}

/**
 * A data-generating policy together with the stationary structure it induces:
 * its state chain's stationary distribution nu, the stationary state-action
 * weights sigma(s,a) = nu(s) * pi_b(a|s), and their minima.
 */
struct BehaviorModel {
  Policy pi_b;
  StateDist nu;
  StateActionDist sigma;
  double sigma_floor = 0.0;
  double pi_floor = 0.0;
  double nu_floor = 0.0;
};

/**
 * Builds the behavior model for pi_b on the given decision process.  Throws
 * ExplorationFailure if pi_b puts zero mass on some action anywhere (checked
 * before ergodicity, since no amount of mixing can repair missing support),
 * then NotErgodic if the induced state chain is reducible or periodic.
 */
inline BehaviorModel make_behavior(const TabularMdp& mdp, const Policy& pi_b) {
  validate_policy(pi_b, mdp.num_states, mdp.num_actions, "behavior policy");
  BehaviorModel model;
  model.pi_b = pi_b;
  model.pi_floor = pi_b.probs.minCoeff();
  if (!(model.pi_floor > 0.0)) {
    throw ExplorationFailure(
        "behavior policy puts zero mass on some action; every state-action "
        "pair must be reachable");
  }
  const Matrix p_s = transition_matrix_s(mdp, pi_b);
  model.nu = stationary_dist(p_s);
  model.nu_floor = model.nu.minCoeff();
  model.sigma.resize(mdp.num_states * mdp.num_actions);
  for (int s = 0; s < mdp.num_states; ++s) {
    for (int a = 0; a < mdp.num_actions; ++a) {
      model.sigma(mdp.idx(s, a)) = model.nu(s) * pi_b.probs(s, a);
    }
  }
  model.sigma_floor = model.sigma.minCoeff();
  if (!(model.sigma_floor > 0.0)) {
    throw ExplorationFailure(
        "stationary state-action weights vanish somewhere; the behavior "
        "policy does not explore every pair");
  }
  return model;
}

/// One logged interaction drawn while following the behavior policy.
struct OffPolicyTuple {
  int s;
  int a;
  double r;
  int s_next;
};

/// One logged interaction that also carries a target-policy action at the
/// next state; the chain then advances through that action too.
struct MixedTuple {
  int s;
  int a;
  double r;
  int s_next;
  int a_next;
};

/**
 * Draws `count` consecutive tuples starting from state s0: each step samples
 * a ~ pi_b(.|s), then s' ~ P(.|s,a), records (s, a, r(s,a), s'), and
 * continues from s'.  Returns the tuples and the state the chain ends in, so
 * successive batches can be chained without restarts.  The draw order
 * (action, then next state, per tuple) is part of the reproducibility
 * contract.
 */
inline std::pair<std::vector<OffPolicyTuple>, int> sample_offpolicy(
    const TabularMdp& mdp, const Policy& pi_b, int s0, long long count,
    SplitRng& rng) {
  if (s0 < 0 || s0 >= mdp.num_states) {
    throw ValidationError("sample_offpolicy: initial state out of range");
  }
  if (count < 0) throw ValidationError("sample_offpolicy: count must be >= 0");
  std::vector<OffPolicyTuple> out;
  out.reserve(static_cast<std::size_t>(count));
  const int A = mdp.num_actions;
  const int S = mdp.num_states;
  int s = s0;
  for (long long t = 0; t < count; ++t) {
    const int a = rng.categorical(pi_b.probs.row(s).data(), A);
    const int sp = rng.categorical(mdp.transitions.row(mdp.idx(s, a)).data(), S);
    out.push_back(OffPolicyTuple{s, a, mdp.rewards(s, a), sp});
    s = sp;
  }
  return {out, s};
}

/**
 * Draws `count` consecutive tuples from the two-policy composed chain,
 * starting at s0: each step samples a ~ pi_b(.|s), s' ~ P(.|s,a),
 * a' ~ target(.|s'), then advances the chain through s'' ~ P(.|s',a') and
 * records (s, a, r(s,a), s', a').  Returns the tuples and the final chain
 * state.  Per tuple the generator is consulted exactly four times, in that
 * order.
 */
inline std::pair<std::vector<MixedTuple>, int> sample_mixed(
    const TabularMdp& mdp, const Policy& pi_b, const Policy& target, int s0,
    long long count, SplitRng& rng) {
  if (s0 < 0 || s0 >= mdp.num_states) {
    throw ValidationError("sample_mixed: initial state out of range");
  }
  if (count < 0) throw ValidationError("sample_mixed: count must be >= 0");
  std::vector<MixedTuple> out;
  out.reserve(static_cast<std::size_t>(count));
  const int A = mdp.num_actions;
  const int S = mdp.num_states;
  int s = s0;
  for (long long t = 0; t < count; ++t) {
    const int a = rng.categorical(pi_b.probs.row(s).data(), A);
    const int sp = rng.categorical(mdp.transitions.row(mdp.idx(s, a)).data(), S);
    const int ap = rng.categorical(target.probs.row(sp).data(), A);
    const int snext =
        rng.categorical(mdp.transitions.row(mdp.idx(sp, ap)).data(), S);
    out.push_back(MixedTuple{s, a, mdp.rewards(s, a), sp, ap});
    s = snext;
  }
  return {out, s};
}

}  // namespace pmdlab

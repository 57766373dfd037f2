#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "errors.hpp"

namespace pmdlab {

/// Dense row-major matrix.  Row-major so that per-state rows (policy rows,
/// next-state distributions) are contiguous in memory.
using Matrix =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

/// Action-value table flattened state-major: entry idx(s,a) = s*A + a.
using QVec = Vector;
/// State-value table, length |S|.
using VVec = Vector;
/// Distribution over states, length |S|.
using StateDist = Vector;
/// Weights over state-action pairs, length |S|*|A|, state-major.
using StateActionDist = Vector;

/// Tolerance for accepting user-provided probability rows as normalized.
inline constexpr double kInputProbTol = 1e-12;
/// Tolerance for internally computed distributions (products, fixed points).
inline constexpr double kComputedProbTol = 1e-10;

/// A stochastic policy: probs(s, a) = probability of action a in state s.
struct Policy {
  Matrix probs;
  int num_states() const { return static_cast<int>(probs.rows()); }
  int num_actions() const { return static_cast<int>(probs.cols()); }
};

/**
 * Finite discounted decision process.
 *
 * `transitions` has one row per state-action pair in state-major order
 * (row idx(s,a) is the next-state distribution for taking a in s) and
 * `rewards` is the |S| x |A| table of deterministic rewards in [0, 1].
 */
struct TabularMdp {
  int num_states = 0;
  int num_actions = 0;
  double gamma = 0.0;
  Matrix transitions;  ///< (|S|*|A|) x |S|
  Matrix rewards;      ///< |S| x |A|, entries in [0, 1]

  /// Flat index of the state-action pair (s, a).
  int idx(int s, int a) const { return s * num_actions + a; }
};

/// Throws ValidationError unless p is a probability vector within `tol`.
/// `what` names the vector in the error message.
inline void validate_distribution(const double* p, int n, double tol,
                                  const std::string& what) {
  double sum = 0.0;
  for (int i = 0; i < n; ++i) {
    if (!(p[i] >= 0.0)) {
      throw ValidationError(what + ": entry " + std::to_string(i) +
                            " is negative or NaN");
    }
    sum += p[i];
  }
  if (std::abs(sum - 1.0) > tol) {
    throw ValidationError(what + ": entries sum to " + std::to_string(sum) +
                          ", not 1");
  }
}

inline void validate_distribution(const Vector& p, double tol,
                                  const std::string& what) {
  validate_distribution(p.data(), static_cast<int>(p.size()), tol, what);
}

/// Validates table shapes, the discount, transition rows, and reward range.
inline void validate_mdp(const TabularMdp& mdp) {
  if (mdp.num_states < 1) throw ValidationError("num_states must be >= 1");
  if (mdp.num_actions < 1) throw ValidationError("num_actions must be >= 1");
  if (!(mdp.gamma >= 0.0 && mdp.gamma < 1.0)) {
    throw ValidationError("gamma must lie in [0, 1)");
  }
  const int sa = mdp.num_states * mdp.num_actions;
  if (mdp.transitions.rows() != sa || mdp.transitions.cols() != mdp.num_states) {
    throw ValidationError("transitions must have shape (num_states*num_actions) x num_states");
  }
  if (mdp.rewards.rows() != mdp.num_states ||
      mdp.rewards.cols() != mdp.num_actions) {
    throw ValidationError("rewards must have shape num_states x num_actions");
  }
  for (int s = 0; s < mdp.num_states; ++s) {
    for (int a = 0; a < mdp.num_actions; ++a) {
      validate_distribution(mdp.transitions.row(mdp.idx(s, a)).data(),
                            mdp.num_states, kInputProbTol,
                            "transitions[" + std::to_string(s) + "][" +
                                std::to_string(a) + "]");
      const double r = mdp.rewards(s, a);
      if (!(r >= 0.0 && r <= 1.0)) {
        throw ValidationError("rewards[" + std::to_string(s) + "][" +
                              std::to_string(a) + "] must lie in [0, 1]");
      }
    }
  }
}

/// Validates that pi is an |S| x |A| table of probability rows.
inline void validate_policy(const Policy& pi, int num_states, int num_actions,
                            const std::string& what = "policy") {
  if (pi.num_states() != num_states || pi.num_actions() != num_actions) {
    throw ValidationError(what + " must have shape num_states x num_actions");
  }
  for (int s = 0; s < num_states; ++s) {
    validate_distribution(pi.probs.row(s).data(), num_actions, kInputProbTol,
                          what + " row " + std::to_string(s));
  }
}

/// The uniform policy on |A| actions.
inline Policy uniform_policy(int num_states, int num_actions) {
  Policy pi;
  pi.probs = Matrix::Constant(num_states, num_actions,
                              1.0 / static_cast<double>(num_actions));
  return pi;
}

/// Rewards flattened state-major into a length-|S||A| vector.
inline QVec reward_vector(const TabularMdp& mdp) {
  QVec r(mdp.num_states * mdp.num_actions);
  for (int s = 0; s < mdp.num_states; ++s) {
    for (int a = 0; a < mdp.num_actions; ++a) {
      r(mdp.idx(s, a)) = mdp.rewards(s, a);
    }
  }
  return r;
}

/// Per-state expected value of q under pi: out(s) = <pi(.|s), q(s,.)>.
inline VVec policy_state_values(const Policy& pi, const QVec& q) {
  const int S = pi.num_states();
  const int A = pi.num_actions();
  VVec w(S);
  for (int s = 0; s < S; ++s) {
    double acc = 0.0;
    const double* prow = pi.probs.row(s).data();
    const double* qrow = q.data() + s * A;
    for (int a = 0; a < A; ++a) acc += prow[a] * qrow[a];
    w(s) = acc;
  }
  return w;
}

/// Per-state maximum of q: out(s) = max_a q(s,a).
inline VVec max_state_values(const QVec& q, int num_states, int num_actions) {
  VVec w(num_states);
  for (int s = 0; s < num_states; ++s) {
    const double* qrow = q.data() + s * num_actions;
    double best = qrow[0];
    for (int a = 1; a < num_actions; ++a) best = std::max(best, qrow[a]);
    w(s) = best;
  }
  return w;
}

/// One-step backup of q under pi:
/// out(s,a) = r(s,a) + gamma * sum_{s'} P(s'|s,a) <pi(.|s'), q(s',.)>.
/// A gamma-contraction in the sup norm with fixed point the action values
/// of pi.
inline QVec bellman_q(const TabularMdp& mdp, const Policy& pi, const QVec& q) {
  const VVec w = policy_state_values(pi, q);
  return reward_vector(mdp) + mdp.gamma * (mdp.transitions * w);
}

/// Greedy one-step backup:
/// out(s,a) = r(s,a) + gamma * sum_{s'} P(s'|s,a) max_{a'} q(s',a').
/// A gamma-contraction whose fixed point is the optimal action-value table.
inline QVec optimal_bellman_q(const TabularMdp& mdp, const QVec& q) {
  const VVec w = max_state_values(q, mdp.num_states, mdp.num_actions);
  return reward_vector(mdp) + mdp.gamma * (mdp.transitions * w);
}

/// One-step backup on state values:
/// out(s) = sum_a pi(a|s) [r(s,a) + gamma * sum_{s'} P(s'|s,a) v(s')].
inline VVec bellman_v(const TabularMdp& mdp, const Policy& pi, const VVec& v) {
  const int S = mdp.num_states;
  const int A = mdp.num_actions;
  VVec out(S);
  for (int s = 0; s < S; ++s) {
    double acc = 0.0;
    for (int a = 0; a < A; ++a) {
      acc += pi.probs(s, a) *
             (mdp.rewards(s, a) +
              mdp.gamma * mdp.transitions.row(mdp.idx(s, a)).dot(v));
    }
    out(s) = acc;
  }
  return out;
}

/// State-to-state chain induced by pi:
/// out(s, s') = sum_a pi(a|s) P(s'|s,a).  Rows are validated to 1e-10.
inline Matrix transition_matrix_s(const TabularMdp& mdp, const Policy& pi) {
  const int S = mdp.num_states;
  const int A = mdp.num_actions;
  Matrix out = Matrix::Zero(S, S);
  for (int s = 0; s < S; ++s) {
    for (int a = 0; a < A; ++a) {
      out.row(s) += pi.probs(s, a) * mdp.transitions.row(mdp.idx(s, a));
    }
    validate_distribution(out.row(s).data(), S, kComputedProbTol,
                          "state chain row " + std::to_string(s));
  }
  return out;
}

/// Pair-to-pair chain induced by pi:
/// out((s,a), (s',a')) = P(s'|s,a) pi(a'|s').  Rows validated to 1e-10.
inline Matrix transition_matrix_sa(const TabularMdp& mdp, const Policy& pi) {
  const int S = mdp.num_states;
  const int A = mdp.num_actions;
  const int SA = S * A;
  Matrix out(SA, S * A);
  for (int s = 0; s < S; ++s) {
    for (int a = 0; a < A; ++a) {
      const int row = mdp.idx(s, a);
      for (int sp = 0; sp < S; ++sp) {
        const double p = mdp.transitions(row, sp);
        for (int ap = 0; ap < A; ++ap) {
          out(row, mdp.idx(sp, ap)) = p * pi.probs(sp, ap);
        }
      }
      validate_distribution(out.row(row).data(), SA, kComputedProbTol,
                            "pair chain row " + std::to_string(row));
    }
  }
  return out;
}

/// Two-policy composed state chain: one step under behavior followed by one
/// step under target, i.e. the matrix product of the two induced chains.
inline Matrix compose_s(const TabularMdp& mdp, const Policy& behavior,
                        const Policy& target) {
  Matrix out = transition_matrix_s(mdp, behavior) *
               transition_matrix_s(mdp, target);
  for (int s = 0; s < mdp.num_states; ++s) {
    validate_distribution(out.row(s).data(), mdp.num_states, kComputedProbTol,
                          "composed chain row " + std::to_string(s));
  }
  return out;
}

/// Applies the pair-to-pair chain of pi to a length-|S||A| vector without
/// materializing the matrix: out(s,a) = sum_{s'} P(s'|s,a) <pi(.|s'), v(s',.)>.
inline QVec apply_transition_sa(const TabularMdp& mdp, const Policy& pi,
                                const QVec& v) {
  return mdp.transitions * policy_state_values(pi, v);
}

/**
 * Exact evaluation of pi: solves the linear system for the state values and
 * backs the action values out of one table lookup.  Throws (internal fault)
 * if either fixed-point residual exceeds 1e-10.
 */
inline std::pair<VVec, QVec> policy_value(const TabularMdp& mdp,
                                          const Policy& pi) {
  const int S = mdp.num_states;
  const Matrix p_s = transition_matrix_s(mdp, pi);
  VVec r_pi(S);
  for (int s = 0; s < S; ++s) {
    double acc = 0.0;
    for (int a = 0; a < mdp.num_actions; ++a) {
      acc += pi.probs(s, a) * mdp.rewards(s, a);
    }
    r_pi(s) = acc;
  }
  Eigen::MatrixXd system = Eigen::MatrixXd::Identity(S, S) - mdp.gamma * p_s;
  const VVec v = Eigen::PartialPivLU<Eigen::MatrixXd>(system).solve(r_pi);
  const QVec q = reward_vector(mdp) + mdp.gamma * (mdp.transitions * v);

  const double res_v = (bellman_v(mdp, pi, v) - v).lpNorm<Eigen::Infinity>();
  const double res_q = (bellman_q(mdp, pi, q) - q).lpNorm<Eigen::Infinity>();
  if (!(res_v <= 1e-10 && res_q <= 1e-10)) {
    throw std::runtime_error(
        "policy_value: fixed-point residual exceeds 1e-10 (internal fault)");
  }
  return {v, q};
}

/**
 * Discounted state-visitation weights of pi from initial distribution mu:
 * d(s') = (1-gamma) sum_t gamma^t Pr[S_t = s'], computed by a transposed
 * linear solve.  Entries are nonnegative and sum to 1 up to solver precision;
 * no renormalization is applied.
 */
inline StateDist visitation(const TabularMdp& mdp, const Policy& pi,
                            const StateDist& mu) {
  const int S = mdp.num_states;
  if (static_cast<int>(mu.size()) != S) {
    throw ValidationError("visitation: mu must have length num_states");
  }
  validate_distribution(mu, kInputProbTol, "mu");
  const Matrix p_s = transition_matrix_s(mdp, pi);
  Eigen::MatrixXd system =
      Eigen::MatrixXd::Identity(S, S) - mdp.gamma * p_s.transpose();
  StateDist d =
      (1.0 - mdp.gamma) * Eigen::PartialPivLU<Eigen::MatrixXd>(system).solve(mu);
  return d;
}

/**
 * Checks the identity that relates the value gap of two policies to the
 * one-step improvement of one over the other, averaged under visitation
 * weights:  [V^pi - V](mu) = 1/(1-gamma) * [T^pi V - V](d), where d are the
 * visitation weights of pi from mu.  Returns the absolute defect, which is
 * zero up to linear-solver precision when V is the value of any policy or an
 * arbitrary vector.
 */
inline double perf_diff_check(const TabularMdp& mdp, const Policy& pi,
                              const VVec& v, const StateDist& mu) {
  const auto [v_pi, q_pi] = policy_value(mdp, pi);
  const StateDist d = visitation(mdp, pi, mu);
  const double lhs = mu.dot(v_pi - v);
  const double rhs = d.dot(bellman_v(mdp, pi, v) - v) / (1.0 - mdp.gamma);
  return std::abs(lhs - rhs);
}

/// Lowest-index maximizing action per state.
inline std::vector<int> greedy_actions(const QVec& q, int num_states,
                                       int num_actions) {
  std::vector<int> out(static_cast<std::size_t>(num_states));
  for (int s = 0; s < num_states; ++s) {
    const double* qrow = q.data() + s * num_actions;
    int best = 0;
    for (int a = 1; a < num_actions; ++a) {
      if (qrow[a] > qrow[best]) best = a;
    }
    out[static_cast<std::size_t>(s)] = best;
  }
  return out;
}

/// One-hot policy on the lowest-index maximizing action per state.
inline Policy greedy_policy(const QVec& q, int num_states, int num_actions) {
  Policy pi;
  pi.probs = Matrix::Zero(num_states, num_actions);
  const std::vector<int> acts = greedy_actions(q, num_states, num_actions);
  for (int s = 0; s < num_states; ++s) {
    pi.probs(s, acts[static_cast<std::size_t>(s)]) = 1.0;
  }
  return pi;
}

/// Sup-norm distance between two policies (max absolute entry difference).
inline double policy_inf_distance(const Policy& a, const Policy& b) {
  return (a.probs - b.probs).cwiseAbs().maxCoeff();
}

}  // namespace pmdlab

#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <vector>

#include "errors.hpp"
#include "mdp.hpp"

namespace pmdlab {

/// The two regularizing geometries supported by the policy update.
enum class MirrorKind {
  NegativeEntropy,  ///< multiplicative update, Kullback-Leibler divergence
  SquaredL2,        ///< additive update with Euclidean simplex projection
};

/**
 * A mirror map over the probability simplex: the divergence it generates, the
 * modulus of convexity `lambda`, and the norm index `norm_p` the modulus is
 * measured in (1 for the entropy geometry, 2 for the Euclidean one).
 */
struct MirrorMap {
  MirrorKind kind = MirrorKind::NegativeEntropy;
  double lambda = 1.0;
  int norm_p = 1;

  static MirrorMap negative_entropy() {
    return MirrorMap{MirrorKind::NegativeEntropy, 1.0, 1};
  }
  static MirrorMap squared_l2() {
    return MirrorMap{MirrorKind::SquaredL2, 1.0, 2};
  }
};

inline const char* mirror_name(MirrorKind kind) {
  return kind == MirrorKind::NegativeEntropy ? "negative-entropy"
                                             : "squared-l2";
}

/**
 * Divergence D(p || q) generated by the map.
 *
 * Entropy geometry: sum_i p_i log(p_i / q_i) with 0 log 0 = 0; returns
 * +infinity when p puts mass where q has none.  Euclidean geometry:
 * 0.5 * ||p - q||_2^2.  Both inputs must be probability vectors.
 */
inline double bregman(const MirrorMap& map, const Vector& p, const Vector& q) {
  if (p.size() != q.size()) {
    throw ValidationError("bregman: p and q must have equal length");
  }
  validate_distribution(p, kInputProbTol, "bregman p");
  validate_distribution(q, kInputProbTol, "bregman q");
  if (map.kind == MirrorKind::SquaredL2) {
    return 0.5 * (p - q).squaredNorm();
  }
  double acc = 0.0;
  for (Eigen::Index i = 0; i < p.size(); ++i) {
    if (p(i) == 0.0) continue;
    if (q(i) == 0.0) return std::numeric_limits<double>::infinity();
    acc += p(i) * std::log(p(i) / q(i));
  }
  return acc;
}

/**
 * Euclidean projection of an arbitrary vector onto the probability simplex
 * via the sorted-threshold rule: sort coordinates in decreasing order
 * (ties broken by original index to keep the result deterministic), find the
 * largest prefix whose running average keeps every kept coordinate positive
 * after shifting, and clip the rest to zero.
 */
inline Vector project_simplex(const Vector& v) {
  const int n = static_cast<int>(v.size());
  if (n < 1) throw ValidationError("project_simplex: input must be non-empty");
  for (int i = 0; i < n; ++i) {
    if (!std::isfinite(v(i))) {
      throw ValidationError("project_simplex: input entries must be finite");
    }
  }
  std::vector<int> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&v](int a, int b) {
    if (v(a) != v(b)) return v(a) > v(b);
    return a < b;
  });
  double cum = 0.0;
  double tau = 0.0;
  int rho = 0;
  for (int j = 1; j <= n; ++j) {
    const double u = v(order[static_cast<std::size_t>(j - 1)]);
    cum += u;
    if (u + (1.0 - cum) / static_cast<double>(j) > 0.0) {
      rho = j;
      tau = (cum - 1.0) / static_cast<double>(j);
    }
  }
  Vector y(n);
  for (int i = 0; i < n; ++i) y(i) = std::max(v(i) - tau, 0.0);
  return y;
}

/**
 * One regularized policy-improvement step on a single state's action row:
 * the maximizer of  eta * <p, q_row> - D(p || pi_row)  over the simplex.
 *
 * Entropy geometry: multiplicative update pi_i * exp(eta * q_i), computed in
 * log space with max subtraction; the current row must be strictly positive.
 * Rows are floored at 1e-300 after normalization (and renormalized if the
 * floor binds) so the next step's logarithms stay finite.  Euclidean
 * geometry: Euclidean projection of pi_row + eta * q_row.
 */
inline Vector pmd_step(const MirrorMap& map, const Vector& pi_row,
                       const Vector& q_row, double eta) {
  const int n = static_cast<int>(pi_row.size());
  if (static_cast<int>(q_row.size()) != n) {
    throw ValidationError("pmd_step: pi_row and q_row must have equal length");
  }
  if (!(eta >= 0.0) || !std::isfinite(eta)) {
    throw ValidationError("pmd_step: eta must be finite and >= 0");
  }
  validate_distribution(pi_row, kInputProbTol, "pmd_step policy row");

  if (map.kind == MirrorKind::SquaredL2) {
    return project_simplex(pi_row + eta * q_row);
  }

  Vector logits(n);
  for (int i = 0; i < n; ++i) {
    if (!(pi_row(i) > 0.0)) {
      throw ValidationError(
          "pmd_step: entropy update requires a strictly positive policy row");
    }
    logits(i) = std::log(pi_row(i)) + eta * q_row(i);
  }
  const double top = logits.maxCoeff();
  Vector w(n);
  double sum = 0.0;
  for (int i = 0; i < n; ++i) {
    w(i) = std::exp(logits(i) - top);
    sum += w(i);
  }
  w /= sum;
  bool floored = false;
  for (int i = 0; i < n; ++i) {
    if (w(i) < 1e-300) {
      w(i) = 1e-300;
      floored = true;
    }
  }
  if (floored) w /= w.sum();
  return w;
}

/// Applies pmd_step to every state row of a policy against the matching
/// row of a flat action-value table.
inline Policy pmd_step_policy(const MirrorMap& map, const Policy& pi,
                              const QVec& q, double eta) {
  const int S = pi.num_states();
  const int A = pi.num_actions();
  if (static_cast<int>(q.size()) != S * A) {
    throw ValidationError("pmd_step_policy: q must have length |S|*|A|");
  }
  Policy out;
  out.probs.resize(S, A);
  for (int s = 0; s < S; ++s) {
    const Vector row =
        pmd_step(map, pi.probs.row(s).transpose(), q.segment(s * A, A), eta);
    out.probs.row(s) = row.transpose();
  }
  return out;
}

}  // namespace pmdlab

#pragma once

#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "algo.hpp"
#include "chain.hpp"
#include "errors.hpp"
#include "mdp.hpp"
#include "mirror.hpp"

namespace pmdlab {

/// The scalar problem constants every finite-sample bound is built from.
struct BoundInputs {
  double gamma = 0.0;
  double alpha = 1.0;
  double lambda = 1.0;     ///< mirror-map modulus of convexity
  int num_states = 0;
  int num_actions = 0;
  double sigma_floor = 0.0;  ///< smallest stationary state-action weight
  double mix_m = 1.0;        ///< mixing envelope prefactor
  double mix_kappa = 0.5;    ///< mixing envelope decay rate
  double d0 = 0.0;           ///< largest per-state divergence from the
                             ///< comparator policy to the initial one
};

/// Sup-norm contraction factor of the damped weighted backup:
/// 1 - alpha * (1 - gamma) * sigma_floor.
inline double contraction_rho(double alpha, double gamma, double sigma_floor) {
  return 1.0 - alpha * (1.0 - gamma) * sigma_floor;
}

/// Sensitivity of a chain's stationary distribution to perturbations of the
/// transition matrix, in terms of its mixing envelope:
/// ceil(log_kappa(1/m)) + 1/(1 - kappa).
inline double shift_sensitivity(double m, double kappa) {
  if (!(m >= 1.0)) throw ValidationError("shift_sensitivity: m must be >= 1");
  if (!(kappa > 0.0 && kappa < 1.0)) {
    throw ValidationError("shift_sensitivity: kappa must lie in (0, 1)");
  }
  const double steps = std::ceil(-std::log(m) / std::log(kappa));
  return steps + 1.0 / (1.0 - kappa);
}

/// Max absolute row sum of a matrix (the operator norm induced by the sup
/// norm on vectors).
inline double matrix_inf_norm(const Matrix& a) {
  return a.cwiseAbs().rowwise().sum().maxCoeff();
}

/// Bound on the total-variation shift of the stationary distribution when
/// the chain moves by `matrix_inf_diff` in the induced sup norm.
inline double stationary_shift_bound(const MixingEstimate& est,
                                     double matrix_inf_diff) {
  return shift_sensitivity(est.m, est.kappa) * matrix_inf_diff;
}

/// Scale by which the composed chain's stationary weights can drift per
/// actor step: |A| * shift_sensitivity(m, kappa).
inline double composed_shift_scale(int num_actions, double m, double kappa) {
  return static_cast<double>(num_actions) * shift_sensitivity(m, kappa);
}

/**
 * Residual-averaging tail weight: how much of the pre-batch chain state can
 * still leak into a batch average of size `count` under geometric averaging
 * weight theta, for a chain with mixing envelope (m, kappa).  Piecewise in
 * the relative size of theta and kappa.
 */
inline double psi_bound(long long count, double theta, double m, double kappa,
                        double gamma) {
  if (count < 1) throw ValidationError("psi_bound: count must be >= 1");
  if (!(theta >= 0.0 && theta <= 1.0)) {
    throw ValidationError("psi_bound: theta must lie in [0, 1]");
  }
  if (!(kappa > 0.0 && kappa < 1.0)) {
    throw ValidationError("psi_bound: kappa must lie in (0, 1)");
  }
  if (!(m > 0.0)) throw ValidationError("psi_bound: m must be > 0");
  if (!(gamma >= 0.0 && gamma < 1.0)) {
    throw ValidationError("psi_bound: gamma must lie in [0, 1)");
  }
  const double bd = static_cast<double>(count);
  if (theta < kappa) {
    return m * std::pow(kappa, bd) / ((1.0 - gamma) * (kappa - theta));
  }
  if (theta == kappa) {
    return m * bd * std::pow(theta, bd - 1.0) / (1.0 - gamma);
  }
  if (theta < 1.0) {
    return m * std::pow(theta, bd) / ((1.0 - gamma) * (theta - kappa));
  }
  return m / (bd * (1.0 - gamma) * (1.0 - kappa));
}

/// Geometric accumulation of per-batch noise levels:
/// xi(t) = sum_{k < t} rho^(t-1-k) / sqrt(B_k), evaluated by the stable
/// forward recurrence xi(k+1) = rho * xi(k) + 1/sqrt(B_k).
inline double xi(int t, double rho, const BatchSchedule& batches) {
  if (t < 0) throw ValidationError("xi: t must be >= 0");
  if (!(rho >= 0.0 && rho < 1.0)) {
    throw ValidationError("xi: rho must lie in [0, 1)");
  }
  double acc = 0.0;
  for (int k = 0; k < t; ++k) {
    acc = rho * acc + 1.0 / std::sqrt(static_cast<double>(batches.at(k)));
  }
  return acc;
}

/// Second-moment constant of the averaged update noise under uniform batch
/// weights: sqrt(4 |S| |A| / (1-gamma)^2 * (1 + m / (1 - kappa))).
inline double noise_moment_constant(const BoundInputs& in) {
  const double sa =
      static_cast<double>(in.num_states) * static_cast<double>(in.num_actions);
  const double mix = 1.0 + in.mix_m / (1.0 - in.mix_kappa);
  const double g = 1.0 - in.gamma;
  return std::sqrt(4.0 * sa / (g * g) * mix);
}

/// Which finite-sample guarantee to evaluate.
enum class TheoremId {
  OffPolicyAverage,  ///< suboptimality of a uniformly drawn actor iterate,
                     ///< off-policy sampling
  OffPolicyLast,     ///< sup-norm error of the final actor's values
  MixedAverage,      ///< as OffPolicyAverage, composed-chain sampling
  MixedLast,         ///< as OffPolicyLast, composed-chain sampling
  GreedyLast,        ///< sup-norm error of the final greedy-target critic
};

struct TheoremBound {
  double value = 0.0;
  double eta_used = 0.0;  ///< the step size the statement prescribes (or
                          ///< echoes back); 0 when no actor is involved
};

/**
 * Evaluates the selected finite-sample guarantee from problem constants and
 * the run shape (iterations K, batch schedule, averaging weight theta).
 *
 * The average-iterate bounds determine their own step size (pass no eta and
 * read it back from `eta_used`) and require a constant batch size; the
 * last-iterate bounds require the constant step size the run used; the
 * greedy-critic bound takes no step size at all.
 */
inline TheoremBound theorem_bound(TheoremId which, const BoundInputs& in,
                                  int K, const BatchSchedule& batches,
                                  double theta,
                                  std::optional<double> eta = std::nullopt) {
  if (!(in.gamma >= 0.0 && in.gamma < 1.0)) {
    throw ValidationError("theorem_bound: gamma must lie in [0, 1)");
  }
  if (!(in.alpha > 0.0 && in.alpha <= 1.0)) {
    throw ValidationError("theorem_bound: alpha must lie in (0, 1]");
  }
  if (!(in.sigma_floor > 0.0)) {
    throw ValidationError("theorem_bound: sigma_floor must be > 0");
  }
  const double g = 1.0 - in.gamma;
  const double a2 = static_cast<double>(in.num_actions) *
                    static_cast<double>(in.num_actions);
  const double rho = contraction_rho(in.alpha, in.gamma, in.sigma_floor);

  TheoremBound out;
  switch (which) {
    case TheoremId::OffPolicyAverage:
    case TheoremId::MixedAverage: {
      if (eta.has_value()) {
        throw ValidationError(
            "theorem_bound: the average-iterate bound prescribes its own eta; "
            "do not supply one");
      }
      if (!batches.is_constant()) {
        throw ValidationError(
            "theorem_bound: the average-iterate bound requires a constant "
            "batch size");
      }
      if (K < 0) throw ValidationError("theorem_bound: K must be >= 0");
      const double c =
          which == TheoremId::OffPolicyAverage
              ? 6.0
              : 6.0 + 4.0 * composed_shift_scale(in.num_actions, in.mix_m,
                                                 in.mix_kappa);
      const double kp1 = static_cast<double>(K) + 1.0;
      const double sf2 = in.sigma_floor * in.sigma_floor;
      out.eta_used = std::sqrt(in.alpha * in.lambda * sf2 * std::pow(g, 4) *
                               in.d0 / (c * a2 * kp1));
      const double term1 =
          3.0 / (kp1 * in.alpha * in.sigma_floor * std::pow(g, 3));
      const double term2 =
          (2.0 / std::sqrt(kp1)) *
          std::sqrt(c * a2 * in.d0 /
                    (in.alpha * in.lambda * sf2 * std::pow(g, 6)));
      const double term3 =
          (2.0 / (in.sigma_floor * g * g)) *
          psi_bound(batches.at(0), theta, in.mix_m, in.mix_kappa, in.gamma);
      out.value = term1 + term2 + term3;
      return out;
    }
    case TheoremId::OffPolicyLast:
    case TheoremId::MixedLast: {
      if (!eta.has_value() || !(*eta > 0.0)) {
        throw ValidationError(
            "theorem_bound: the last-iterate bound requires the positive eta "
            "the run used");
      }
      if (K < 1) throw ValidationError("theorem_bound: K must be >= 1");
      const double c1 = noise_moment_constant(in);
      const double term1 =
          2.0 * std::pow(rho, K - 1) / (in.alpha * in.sigma_floor * g * g);
      const double term2 = 2.0 * in.gamma /
                           (in.alpha * (*eta) * g * g * in.sigma_floor *
                            in.sigma_floor);
      const double term3 =
          (c1 / (in.sigma_floor * g)) *
          (xi(K, rho, batches) + xi(K - 1, rho, batches) +
           1.0 / std::sqrt(static_cast<double>(batches.at(K - 1))));
      out.value = term1 + term2 + term3;
      out.eta_used = *eta;
      return out;
    }
    default: {  // GreedyLast
      if (eta.has_value()) {
        throw ValidationError(
            "theorem_bound: the greedy-critic bound takes no eta");
      }
      if (K < 0) throw ValidationError("theorem_bound: K must be >= 0");
      const double c1 = noise_moment_constant(in);
      out.value = std::pow(rho, K) / g + in.alpha * c1 * xi(K, rho, batches);
      out.eta_used = 0.0;
      return out;
    }
  }
}

/// Which closed-form run shape to generate for a target accuracy.
enum class ScheduleKind {
  AdaptiveStep,  ///< actor-critic with a growing batch schedule and an
                 ///< accuracy-matched constant step size
  BatchGreedy,   ///< greedy-target critic with a growing batch schedule
  ConstantStep,  ///< actor-critic with one batch size and the
                 ///< average-iterate step size
};

/// A generated run shape plus its sample-cost accounting: the exact total of
/// the integer batch sizes actually scheduled, and the closed-form cost
/// expression (no rounding), which scales exactly as 1/eps^2.
struct ScheduleResult {
  int num_iterations = 0;  ///< K, in the runner's convention for the kind
  double eta = 0.0;
  BatchSchedule batches;
  long long total_samples = 0;
  double total_samples_formula = 0.0;
};

/**
 * Generates the run shape that drives the matching guarantee to accuracy
 * eps.  `batch_scale` multiplies the batch-size coefficient only (iteration
 * counts and step sizes are untouched); it exists because the worst-case
 * batch constants are far larger than small well-conditioned instances need.
 */
inline ScheduleResult remark_schedules(ScheduleKind kind, double eps,
                                       const BoundInputs& in,
                                       double theta = 1.0,
                                       double batch_scale = 1.0) {
  if (!(eps > 0.0)) throw ValidationError("remark_schedules: eps must be > 0");
  if (!(batch_scale > 0.0)) {
    throw ValidationError("remark_schedules: batch_scale must be > 0");
  }
  if (!(in.alpha > 0.0 && in.alpha <= 1.0)) {
    throw ValidationError("remark_schedules: alpha must lie in (0, 1]");
  }
  if (!(in.sigma_floor > 0.0 && in.sigma_floor <= 1.0)) {
    throw ValidationError("remark_schedules: sigma_floor must lie in (0, 1]");
  }
  if (!(in.mix_kappa > 0.0 && in.mix_kappa < 1.0)) {
    throw ValidationError("remark_schedules: kappa must lie in (0, 1)");
  }
  const double g = 1.0 - in.gamma;
  const double sa =
      static_cast<double>(in.num_states) * static_cast<double>(in.num_actions);
  const double a2 = static_cast<double>(in.num_actions) *
                    static_cast<double>(in.num_actions);
  const double rho = contraction_rho(in.alpha, in.gamma, in.sigma_floor);
  const double mix = 1.0 + in.mix_m / (1.0 - in.mix_kappa);

  auto checked_ceil = [](double x, const char* what) -> long long {
    if (!(x < 1e15)) {
      throw ValidationError(std::string("remark_schedules: ") + what +
                            " exceeds the feasible range");
    }
    const double c = std::ceil(x);
    return c < 1.0 ? 1LL : static_cast<long long>(c);
  };

  ScheduleResult out;
  switch (kind) {
    case ScheduleKind::AdaptiveStep: {
      const double sf2 = in.sigma_floor * in.sigma_floor;
      // Iteration count from the squared-floor contraction rate.
      const double rate = 1.0 - g * in.alpha * sf2;
      const double k_real =
          std::log(6.0 / (in.alpha * in.sigma_floor * g * g * eps)) /
              std::log(1.0 / rate) +
          1.0;
      out.num_iterations =
          static_cast<int>(checked_ceil(std::max(k_real, 1.0), "K"));
      out.eta = 6.0 * in.gamma / (in.alpha * g * g * sf2 * eps);
      const double coeff = batch_scale * (81.0 / (sf2 * g * g)) *
                           (4.0 * sa / (g * g)) * mix /
                           std::pow(1.0 - std::sqrt(rho), 2);
      std::vector<long long> sizes;
      sizes.reserve(static_cast<std::size_t>(out.num_iterations) + 1);
      for (int k = 0; k <= out.num_iterations; ++k) {
        const double b = coeff *
                         std::pow(rho, out.num_iterations - k - 2) /
                         (eps * eps);
        sizes.push_back(checked_ceil(b, "batch size"));
      }
      out.batches.sizes = std::move(sizes);
      out.total_samples = out.batches.total(out.num_iterations + 1);
      out.total_samples_formula = coeff / (rho * rho) /
                                  (g * in.alpha * in.sigma_floor) /
                                  (eps * eps);
      return out;
    }
    case ScheduleKind::BatchGreedy: {
      const double k_real =
          std::log(2.0 / (eps * g)) / std::log(1.0 / rho);
      out.num_iterations =
          static_cast<int>(checked_ceil(std::max(k_real, 1.0), "K"));
      out.eta = 0.0;
      const double coeff = batch_scale *
                           (16.0 * in.alpha * in.alpha * sa / (g * g)) * mix /
                           std::pow(1.0 - std::sqrt(rho), 2);
      std::vector<long long> sizes;
      sizes.reserve(static_cast<std::size_t>(out.num_iterations));
      for (int k = 0; k < out.num_iterations; ++k) {
        const double b = coeff *
                         std::pow(rho, out.num_iterations - k - 1) /
                         (eps * eps);
        sizes.push_back(checked_ceil(b, "batch size"));
      }
      out.batches.sizes = std::move(sizes);
      out.total_samples = out.batches.total(out.num_iterations);
      out.total_samples_formula =
          coeff / (g * in.alpha * in.sigma_floor) / (eps * eps);
      return out;
    }
    default: {  // ConstantStep
      if (!(theta < in.mix_kappa)) {
        throw ValidationError(
            "remark_schedules: the constant-batch schedule requires "
            "theta < kappa");
      }
      const double sf2 = in.sigma_floor * in.sigma_floor;
      const double k_real = std::max(
          9.0 / (in.alpha * in.sigma_floor * std::pow(g, 3) * eps),
          216.0 * a2 * in.d0 /
              (in.alpha * in.lambda * sf2 * std::pow(g, 6) * eps * eps));
      out.num_iterations = static_cast<int>(checked_ceil(k_real, "K"));
      const double b_real =
          batch_scale *
          std::log(6.0 * in.mix_m /
                   (eps * in.sigma_floor * std::pow(g, 3) *
                    (in.mix_kappa - theta))) /
          std::log(1.0 / in.mix_kappa);
      const long long b = checked_ceil(std::max(b_real, 1.0), "batch size");
      out.batches = BatchSchedule::constant(b);
      const double kp1 = static_cast<double>(out.num_iterations) + 1.0;
      out.eta = std::sqrt(in.alpha * in.lambda * sf2 * std::pow(g, 4) *
                          in.d0 / (6.0 * a2 * kp1));
      out.total_samples =
          (static_cast<long long>(out.num_iterations) + 1) * b;
      out.total_samples_formula = k_real * std::max(b_real, 1.0);
      return out;
    }
  }
}

/**
 * Problem constants measured on a concrete instance: the mirror modulus, the
 * behavior chain's stationary floor and fitted mixing envelope, and the
 * worst per-state divergence from the comparator policy to the initial one.
 * `alpha` is copied through unchanged.
 */
inline BoundInputs extract_constants(const TabularMdp& mdp,
                                     const BehaviorModel& behavior,
                                     const MirrorMap& map, const Policy& pi0,
                                     const Policy& pi_star, double alpha,
                                     int t_max = 200) {
  validate_mdp(mdp);
  validate_policy(pi0, mdp.num_states, mdp.num_actions, "initial policy");
  validate_policy(pi_star, mdp.num_states, mdp.num_actions,
                  "comparator policy");
  BoundInputs in;
  in.gamma = mdp.gamma;
  in.alpha = alpha;
  in.lambda = map.lambda;
  in.num_states = mdp.num_states;
  in.num_actions = mdp.num_actions;
  in.sigma_floor = behavior.sigma_floor;
  if (!(in.sigma_floor > 0.0)) {
    throw ExplorationFailure(
        "extract_constants: behavior model has vanishing stationary weights");
  }
  const MixingEstimate est =
      estimate_mixing(transition_matrix_s(mdp, behavior.pi_b), behavior.nu,
                      t_max);
  in.mix_m = est.m;
  in.mix_kappa = est.kappa;
  double d0 = 0.0;
  for (int s = 0; s < mdp.num_states; ++s) {
    d0 = std::max(d0, bregman(map, pi_star.probs.row(s).transpose(),
                              pi0.probs.row(s).transpose()));
  }
  in.d0 = d0;
  return in;
}

/**
 * Pathwise decomposition of the actor's remaining one-state advantage gap
 * against a comparator policy at iteration k: the gap splits exactly into a
 * forgetting term from the initial critic error (b0), and per-step
 * contributions from critic drift (c), actor motion (d), weight drift (e),
 * and injected noise (f), each propagated through the damped weighted
 * backup's linear part.  `residual` is the absolute defect of the identity
 * as reconstructed from the recorded run; it is zero up to roundoff.
 */
struct BiasDecomposition {
  int state = 0;
  int upto = 0;  ///< the iteration k being decomposed
  double lhs = 0.0;
  double b0 = 0.0;
  std::vector<double> c, d, e, f;  ///< entry j-1 holds step j's contribution
  double reconstruction = 0.0;
  double residual = 0.0;
};

inline BiasDecomposition bias_decomposition(const TabularMdp& mdp,
                                            const RunResult& run,
                                            const BehaviorModel& behavior,
                                            const Policy& pi_star, int state,
                                            int upto) {
  const AlgoKind kind = run.config.kind;
  if (kind == AlgoKind::BatchQ) {
    throw ValidationError(
        "bias_decomposition: greedy-target runs have no actor to decompose");
  }
  if (state < 0 || state >= mdp.num_states) {
    throw ValidationError("bias_decomposition: state out of range");
  }
  if (upto < 0 || upto >= static_cast<int>(run.trace.size())) {
    throw ValidationError("bias_decomposition: upto exceeds the trace length");
  }
  validate_policy(pi_star, mdp.num_states, mdp.num_actions,
                  "comparator policy");
  const int A = mdp.num_actions;
  const double alpha = run.config.alpha;
  const int k = upto;

  for (int j = 0; j <= k; ++j) {
    const IterationRecord& rec = run.trace[static_cast<std::size_t>(j)];
    if (rec.q_k.size() == 0 || (j < k && rec.omega_bar.size() == 0)) {
      throw ValidationError(
          "bias_decomposition: requires a full trace (critics and noise "
          "vectors recorded)");
    }
    if (kind == AlgoKind::Approximate && j < k && rec.sigma_k.size() == 0) {
      throw ValidationError(
          "bias_decomposition: requires recorded stationary weights");
    }
  }

  auto pi_at = [&](int j) -> const Policy& {
    return run.trace[static_cast<std::size_t>(j)].pi_k;
  };

  // Stationary weights paired with policy pi_j in the propagation matrix:
  // for composed-chain runs these are the weights the runner realized while
  // producing Q^j (recorded at iteration j-1); the j = 0 matrix uses weights
  // recomputed cold for the initial actor.  Off-policy runs use the fixed
  // behavior weights throughout.
  StateActionDist sigma0_mixed;
  if (kind == AlgoKind::Approximate) {
    const Matrix composed0 = compose_s(mdp, behavior.pi_b, pi_at(0));
    const StateDist nu0 = stationary_dist(composed0);
    sigma0_mixed.resize(mdp.num_states * A);
    for (int s = 0; s < mdp.num_states; ++s) {
      for (int a = 0; a < A; ++a) {
        sigma0_mixed(mdp.idx(s, a)) = nu0(s) * behavior.pi_b.probs(s, a);
      }
    }
  }
  auto sigma_at = [&](int j) -> const StateActionDist& {
    if (kind == AlgoKind::Approximate) {
      if (j == 0) return sigma0_mixed;
      return run.trace[static_cast<std::size_t>(j - 1)].sigma_k;
    }
    return behavior.sigma;
  };

  // Linear part of the damped weighted backup at step j, applied p times.
  auto propagate = [&](int j, int p, QVec v) {
    const StateActionDist& sig = sigma_at(j);
    const Policy& pi_j = pi_at(j);
    for (int rep = 0; rep < p; ++rep) {
      v = v - alpha * sig.cwiseProduct(
                          v - mdp.gamma * apply_transition_sa(mdp, pi_j, v))
                          .eval();
    }
    return v;
  };

  // Inner product of an action-difference row at `state` with a flat table.
  auto inner = [&](const Vector& diff_row, const QVec& table) {
    double acc = 0.0;
    for (int a = 0; a < A; ++a) {
      acc += diff_row(a) * table(mdp.idx(state, a));
    }
    return acc;
  };
  auto diff_rows = [&](const Policy& lhs, const Policy& rhs) -> Vector {
    return (lhs.probs.row(state) - rhs.probs.row(state)).transpose();
  };

  std::vector<QVec> q_pi(static_cast<std::size_t>(k) + 1);
  for (int j = 0; j <= k; ++j) {
    q_pi[static_cast<std::size_t>(j)] = policy_value(mdp, pi_at(j)).second;
  }

  BiasDecomposition out;
  out.state = state;
  out.upto = k;
  out.lhs = inner(diff_rows(pi_star, pi_at(k)),
                  q_pi[static_cast<std::size_t>(k)] -
                      run.trace[static_cast<std::size_t>(k)].q_k);
  out.b0 = inner(diff_rows(pi_star, pi_at(0)),
                 propagate(0, k,
                           q_pi[0] - run.trace[0].q_k));

  out.c.resize(static_cast<std::size_t>(k));
  out.d.resize(static_cast<std::size_t>(k));
  out.e.resize(static_cast<std::size_t>(k));
  out.f.resize(static_cast<std::size_t>(k));
  double sum = out.b0;
  for (int j = 1; j <= k; ++j) {
    const std::size_t idx = static_cast<std::size_t>(j - 1);
    const QVec stale_gap =
        q_pi[static_cast<std::size_t>(j - 1)] -
        run.trace[static_cast<std::size_t>(j - 1)].q_k;
    out.c[idx] = inner(diff_rows(pi_star, pi_at(j)),
                       propagate(j, k - j + 1,
                                 q_pi[static_cast<std::size_t>(j)] -
                                     q_pi[static_cast<std::size_t>(j - 1)]));
    out.d[idx] = inner(diff_rows(pi_at(j - 1), pi_at(j)),
                       propagate(j, k - j + 1, stale_gap));
    out.e[idx] = inner(diff_rows(pi_star, pi_at(j - 1)),
                       propagate(j, k - j + 1, stale_gap) -
                           propagate(j - 1, k - j + 1, stale_gap));
    out.f[idx] = inner(
        diff_rows(pi_star, pi_at(j)),
        propagate(j, k - j,
                  alpha *
                      run.trace[static_cast<std::size_t>(j - 1)].omega_bar));
    sum += out.c[idx] + out.d[idx] + out.e[idx] - out.f[idx];
  }
  out.reconstruction = sum;
  out.residual = std::abs(out.lhs - out.reconstruction);
  return out;
}

}  // namespace pmdlab

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "chain.hpp"
#include "errors.hpp"
#include "mdp.hpp"
#include "mirror.hpp"
#include "rng.hpp"

namespace pmdlab {

/// Which stochastic recursion to run.
enum class AlgoKind {
  Expected,     ///< off-policy tuples, expectation over the next action
  Approximate,  ///< composed-chain tuples, sampled next action
  BatchQ,       ///< off-policy tuples, greedy target, no explicit policy
};

/// How the per-iteration step size is chosen.
enum class EtaMode {
  Constant,        ///< eta_k = eta_base
  Adaptive,        ///< eta_base scaled by the current greedy divergence
  QlearningEquiv,  ///< large enough that the update is exactly greedy
};

/// How much per-iteration state the run retains.
enum class TraceMode {
  Full,   ///< policies, critics, update and noise vectors
  Light,  ///< policies and scalars only
};

inline const char* algo_name(AlgoKind kind) {
  switch (kind) {
    case AlgoKind::Expected: return "expected";
    case AlgoKind::Approximate: return "approximate";
    default: return "batch-q";
  }
}

/// Per-iteration batch sizes: a single entry means a constant size; otherwise
/// entry k is the size of batch k.
struct BatchSchedule {
  std::vector<long long> sizes{1};

  long long at(int k) const {
    if (sizes.empty()) throw ValidationError("batch schedule is empty");
    if (sizes.size() == 1) return sizes.front();
    if (k < 0 || k >= static_cast<int>(sizes.size())) {
      throw ValidationError("batch schedule has no entry for iteration " +
                            std::to_string(k));
    }
    return sizes[static_cast<std::size_t>(k)];
  }

  bool is_constant() const {
    for (long long b : sizes) {
      if (b != sizes.front()) return false;
    }
    return true;
  }

  long long total(int num_iterations) const {
    long long sum = 0;
    for (int k = 0; k < num_iterations; ++k) sum += at(k);
    return sum;
  }

  static BatchSchedule constant(long long b) { return BatchSchedule{{b}}; }
};

/// Full description of a single run.
struct AlgoConfig {
  AlgoKind kind = AlgoKind::Expected;
  MirrorMap map = MirrorMap::negative_entropy();
  int num_iterations = 0;  ///< K; the main loop visits k = 0..K (batch-q: 0..K-1)
  double alpha = 1.0;      ///< critic step size, in (0, 1]
  EtaMode eta_mode = EtaMode::Constant;
  double eta_base = 1.0;   ///< step size (Constant) or base/floor (other modes)
  BatchSchedule batches = BatchSchedule::constant(1);
  double theta = 1.0;      ///< within-batch geometric averaging weight, in [0, 1]
  std::uint64_t seed = 0;  ///< recorded for serialization; the runner uses the
                           ///< generator handed to it
  int initial_state = 0;
  bool noise_free = false;  ///< replace sampled updates by their exact means
  TraceMode trace_mode = TraceMode::Full;
  /// Diagnostic escape hatch: lets alpha leave (0, 1] so that the boundedness
  /// checks can demonstrate what goes wrong.  Off by default.
  bool allow_alpha_out_of_range = false;
  /// Mixing probes run every `stride` iterations on the composed chain
  /// (Approximate runs only); 0 picks a stride giving about 20 probes.
  int mixing_probe_stride = 0;
  Policy initial_policy;  ///< empty means uniform
};

/// What the runner retains about iteration k.  `pi_k` and `q_k` are the
/// actor/critic *before* this iteration's update; the remaining fields
/// describe the update itself.
struct IterationRecord {
  int k = 0;
  Policy pi_k;
  QVec q_k;             ///< Full trace only
  double eta_k = 0.0;
  long long b_k = 0;
  QVec delta_bar;       ///< averaged sampled update (Full trace only)
  QVec omega_bar;       ///< delta_bar minus its conditional mean (Full only)
  StateActionDist sigma_k;  ///< realized stationary weights (Approximate Full)
  long long samples_cumulative = 0;
};

/// Everything a run produces.
struct RunResult {
  AlgoConfig config;  ///< the configuration the run executed
  std::vector<IterationRecord> trace;
  Policy final_pi;  ///< actor after the last update (batch-q: greedy critic)
  QVec final_q;     ///< critic after the last update
  Policy pi_K;      ///< actor in force at the last recorded iteration
  Policy pi_hat;    ///< actor at a uniformly drawn recorded iteration
  int hat_index = 0;
  double q_min_seen = 0.0;
  double q_max_seen = 0.0;
  /// Smallest stationary state-action weight actually realized during the
  /// run (Approximate: minimum over iterations of the composed-chain
  /// weights; otherwise the behavior model's floor).
  double sigma_floor_run = 0.0;
  /// Most conservative mixing surrogates observed by the periodic probes
  /// (Approximate runs; NaN elsewhere).
  double probe_m = std::numeric_limits<double>::quiet_NaN();
  double probe_kappa = std::numeric_limits<double>::quiet_NaN();
  long long total_samples = 0;
};

/// Optional per-tuple observer (e.g. a trajectory logger).
struct TupleSink {
  virtual ~TupleSink() = default;
  virtual void on_offpolicy(int /*k*/, long long /*t*/,
                            const OffPolicyTuple& /*tuple*/) {}
  virtual void on_mixed(int /*k*/, long long /*t*/,
                        const MixedTuple& /*tuple*/) {}
};

/**
 * Normalized within-batch averaging weights for a batch of size `count`:
 * w_t proportional to theta^(count-1-t) for t = 0..count-1 (0^0 = 1, so
 * theta = 0 keeps only the last tuple; theta = 1 averages uniformly).
 */
inline std::vector<double> td_weights(long long count, double theta) {
  if (count < 1) throw ValidationError("td_weights: count must be >= 1");
  if (!(theta >= 0.0 && theta <= 1.0)) {
    throw ValidationError("td_weights: theta must lie in [0, 1]");
  }
  std::vector<double> w(static_cast<std::size_t>(count));
  if (theta == 1.0) {
    const double c = 1.0 / static_cast<double>(count);
    for (double& x : w) x = c;
    return w;
  }
  if (theta == 0.0) {
    for (double& x : w) x = 0.0;
    w.back() = 1.0;
    return w;
  }
  double denom = 0.0;
  double p = 1.0;
  for (long long t = 0; t < count; ++t) {
    denom += p;
    p *= theta;
  }
  p = 1.0;
  for (long long e = 0; e < count; ++e) {
    w[static_cast<std::size_t>(count - 1 - e)] = p / denom;
    p *= theta;
  }
  return w;
}

/// Temporal-difference error of one tuple with the next action averaged
/// under a target policy: r + gamma * <target(.|s'), q(s',.)> - q(s,a).
inline double expected_td_error_value(const TabularMdp& mdp,
                                      const Policy& target, const QVec& q,
                                      const OffPolicyTuple& tuple) {
  const int A = mdp.num_actions;
  double acc = 0.0;
  const double* prow = target.probs.row(tuple.s_next).data();
  const double* qrow = q.data() + tuple.s_next * A;
  for (int a = 0; a < A; ++a) acc += prow[a] * qrow[a];
  return tuple.r + mdp.gamma * acc - q(mdp.idx(tuple.s, tuple.a));
}

/// The same error embedded in a table that is zero away from (s, a).
inline QVec expected_td_error(const TabularMdp& mdp, const Policy& target,
                              const QVec& q, const OffPolicyTuple& tuple) {
  QVec out = QVec::Zero(mdp.num_states * mdp.num_actions);
  out(mdp.idx(tuple.s, tuple.a)) = expected_td_error_value(mdp, target, q, tuple);
  return out;
}

/// Temporal-difference error of one tuple with a sampled next action:
/// r + gamma * q(s', a') - q(s, a).
inline double approx_td_error_value(const TabularMdp& mdp, const QVec& q,
                                    const MixedTuple& tuple) {
  return tuple.r + mdp.gamma * q(mdp.idx(tuple.s_next, tuple.a_next)) -
         q(mdp.idx(tuple.s, tuple.a));
}

/// The same error embedded in a table that is zero away from (s, a).
inline QVec approx_td_error(const TabularMdp& mdp, const QVec& q,
                            const MixedTuple& tuple) {
  QVec out = QVec::Zero(mdp.num_states * mdp.num_actions);
  out(mdp.idx(tuple.s, tuple.a)) = approx_td_error_value(mdp, q, tuple);
  return out;
}

/**
 * Damped, exploration-weighted backup under a target policy:
 * out = q + alpha * sigma .* (backup(q) - q).  With positive weights and
 * alpha in (0, 1] this contracts in the sup norm with factor
 * 1 - alpha * (1 - gamma) * min(sigma) and shares its fixed point with the
 * undamped backup.
 */
inline QVec weighted_bellman(const TabularMdp& mdp, const Policy& target,
                             const StateActionDist& sigma, double alpha,
                             const QVec& q) {
  if (static_cast<int>(sigma.size()) != mdp.num_states * mdp.num_actions) {
    throw ValidationError("weighted_bellman: sigma must have length |S|*|A|");
  }
  if (!(sigma.minCoeff() > 0.0)) {
    throw ExplorationFailure(
        "weighted_bellman: sigma must be strictly positive everywhere");
  }
  return q + alpha * sigma.cwiseProduct(bellman_q(mdp, target, q) - q).eval();
}

inline QVec weighted_bellman(const TabularMdp& mdp, const Policy& target,
                             const BehaviorModel& behavior, double alpha,
                             const QVec& q) {
  return weighted_bellman(mdp, target, behavior.sigma, alpha, q);
}

/// Greedy-target counterpart of weighted_bellman.
inline QVec weighted_optimal_bellman(const TabularMdp& mdp,
                                     const StateActionDist& sigma,
                                     double alpha, const QVec& q) {
  if (static_cast<int>(sigma.size()) != mdp.num_states * mdp.num_actions) {
    throw ValidationError(
        "weighted_optimal_bellman: sigma must have length |S|*|A|");
  }
  if (!(sigma.minCoeff() > 0.0)) {
    throw ExplorationFailure(
        "weighted_optimal_bellman: sigma must be strictly positive everywhere");
  }
  return q + alpha * sigma.cwiseProduct(optimal_bellman_q(mdp, q) - q).eval();
}

/**
 * Step size proportional to how far the current policy is from greedy:
 * eta_base times the largest per-state divergence from the greedy policy to
 * the current one, floored at 1e-12 so the step never vanishes entirely.
 */
inline double adaptive_eta(const MirrorMap& map, const Policy& pi,
                           const QVec& q, double eta_base) {
  if (!(eta_base >= 0.0) || !std::isfinite(eta_base)) {
    throw ValidationError("adaptive_eta: eta_base must be finite and >= 0");
  }
  const int S = pi.num_states();
  const int A = pi.num_actions();
  const Policy tilde = greedy_policy(q, S, A);
  double worst = 0.0;
  for (int s = 0; s < S; ++s) {
    worst = std::max(worst, bregman(map, tilde.probs.row(s).transpose(),
                                    pi.probs.row(s).transpose()));
  }
  return eta_base * std::max(worst, 1e-12);
}

/**
 * Step size large enough that the Euclidean-geometry update lands exactly on
 * the greedy policy.  Twice the reciprocal of the smallest per-state gap
 * between the best and second-best critic entries already suffices in exact
 * arithmetic, but it puts the worst state (incumbent policy on the runner-up
 * vertex) exactly on the simplex projection's keep/drop threshold, where
 * rounding can leave stray mass of order machine epsilon; returning four
 * times the reciprocal leaves a full unit of headroom.  States whose rows
 * are entirely tied impose no requirement.  Floored at eta_floor.
 */
inline double qlearning_equiv_eta(const QVec& q, int num_states,
                                  int num_actions, double eta_floor) {
  if (!(eta_floor > 0.0)) {
    throw ValidationError("qlearning_equiv_eta: eta_floor must be > 0");
  }
  double max_inv_gap = 0.0;
  for (int s = 0; s < num_states; ++s) {
    const double* qrow = q.data() + s * num_actions;
    double best = qrow[0];
    for (int a = 1; a < num_actions; ++a) best = std::max(best, qrow[a]);
    bool has_second = false;
    double second = -std::numeric_limits<double>::infinity();
    for (int a = 0; a < num_actions; ++a) {
      if (qrow[a] < best) {
        has_second = true;
        second = std::max(second, qrow[a]);
      }
    }
    if (has_second) {
      max_inv_gap = std::max(max_inv_gap, 1.0 / (best - second));
    }
  }
  return std::max(4.0 * max_inv_gap, eta_floor);
}

namespace detail {

inline void validate_config_common(const TabularMdp& mdp,
                                   const AlgoConfig& cfg) {
  validate_mdp(mdp);
  if (cfg.num_iterations < 0) {
    throw ValidationError("num_iterations must be >= 0");
  }
  if (cfg.allow_alpha_out_of_range) {
    if (!(cfg.alpha > 0.0) || !std::isfinite(cfg.alpha)) {
      throw ValidationError("alpha must be finite and > 0");
    }
  } else if (!(cfg.alpha > 0.0 && cfg.alpha <= 1.0)) {
    throw ValidationError("alpha must lie in (0, 1]");
  }
  if (!(cfg.theta >= 0.0 && cfg.theta <= 1.0)) {
    throw ValidationError("theta must lie in [0, 1]");
  }
  if (!(cfg.eta_base >= 0.0) || !std::isfinite(cfg.eta_base)) {
    throw ValidationError("eta_base must be finite and >= 0");
  }
  if (cfg.initial_state < 0 || cfg.initial_state >= mdp.num_states) {
    throw ValidationError("initial_state out of range");
  }
  for (long long b : cfg.batches.sizes) {
    if (b < 1) throw ValidationError("batch sizes must be >= 1");
    if (cfg.theta > 0.0 && cfg.theta < 1.0 && b > (1LL << 26)) {
      throw ValidationError(
          "batch sizes above 2^26 require theta equal to 0 or 1");
    }
  }
}

inline Policy resolve_initial_policy(const TabularMdp& mdp,
                                     const AlgoConfig& cfg) {
  if (cfg.initial_policy.probs.size() == 0) {
    return uniform_policy(mdp.num_states, mdp.num_actions);
  }
  validate_policy(cfg.initial_policy, mdp.num_states, mdp.num_actions,
                  "initial policy");
  if (cfg.map.kind == MirrorKind::NegativeEntropy &&
      !(cfg.initial_policy.probs.minCoeff() > 0.0)) {
    throw ValidationError(
        "initial policy must be strictly positive under the entropy geometry");
  }
  return cfg.initial_policy;
}

/// Per-iteration step size according to the configured mode.
inline double resolve_eta(const AlgoConfig& cfg, const Policy& pi,
                          const QVec& q, int num_states, int num_actions) {
  switch (cfg.eta_mode) {
    case EtaMode::Constant:
      return cfg.eta_base;
    case EtaMode::Adaptive:
      return adaptive_eta(cfg.map, pi, q, cfg.eta_base);
    default:
      return qlearning_equiv_eta(q, num_states, num_actions, cfg.eta_base);
  }
}

/// Batch-averaging weight of tuple t in a batch of size b (streamed form of
/// td_weights; the two agree bitwise for theta in {0, 1}).
struct BatchWeights {
  double theta = 1.0;
  long long b = 1;
  double inv_b = 1.0;
  std::vector<double> table;  ///< materialized when theta is in (0, 1)

  BatchWeights(double theta_in, long long b_in) : theta(theta_in), b(b_in) {
    inv_b = 1.0 / static_cast<double>(b);
    if (theta > 0.0 && theta < 1.0) table = td_weights(b, theta);
  }
  double at(long long t) const {
    if (theta == 1.0) return inv_b;
    if (theta == 0.0) return t == b - 1 ? 1.0 : 0.0;
    return table[static_cast<std::size_t>(t)];
  }
};

constexpr long long kSampleChunk = 1LL << 15;

}  // namespace detail

/**
 * Stochastic mirror-ascent actor with an incremental critic driven by
 * off-policy tuples, with the next action integrated out under the freshly
 * improved actor.
 *
 * Per iteration k = 0..K: improve the actor against the current critic,
 * draw batch k along the behavior chain (continuing from the state where
 * batch k-1 stopped), average the per-tuple errors with the configured
 * within-batch weights, and move the critic by alpha times the average.
 * After the loop one recorded iteration index is drawn uniformly (this is
 * the only generator use outside sampling).
 */
inline RunResult run_expected_td_pmd(const TabularMdp& mdp,
                                     const BehaviorModel& behavior,
                                     const AlgoConfig& cfg, SplitRng& rng,
                                     TupleSink* sink = nullptr) {
  detail::validate_config_common(mdp, cfg);
  validate_policy(behavior.pi_b, mdp.num_states, mdp.num_actions,
                  "behavior policy");
  if (!(behavior.sigma_floor > 0.0)) {
    throw ExplorationFailure(
        "behavior model has vanishing stationary weights");
  }
  const int S = mdp.num_states;
  const int A = mdp.num_actions;
  const int SA = S * A;
  const int K = cfg.num_iterations;
  const bool full = cfg.trace_mode == TraceMode::Full;

  RunResult run;
  run.config = cfg;
  run.trace.reserve(static_cast<std::size_t>(K) + 1);
  run.sigma_floor_run = behavior.sigma_floor;

  Policy pi = detail::resolve_initial_policy(mdp, cfg);
  QVec q = QVec::Zero(SA);
  int s_cur = cfg.initial_state;
  long long samples_cum = 0;

  for (int k = 0; k <= K; ++k) {
    const double eta_k = detail::resolve_eta(cfg, pi, q, S, A);
    const Policy pi_next = pmd_step_policy(cfg.map, pi, q, eta_k);
    const long long b_k = cfg.batches.at(k);

    QVec delta_bar = QVec::Zero(SA);
    QVec omega_bar;
    if (cfg.noise_free) {
      delta_bar =
          behavior.sigma.cwiseProduct(bellman_q(mdp, pi_next, q) - q);
      omega_bar = QVec::Zero(SA);
    } else {
      const detail::BatchWeights weights(cfg.theta, b_k);
      const VVec w_next = policy_state_values(pi_next, q);
      long long t = 0;
      while (t < b_k) {
        const long long chunk = std::min(detail::kSampleChunk, b_k - t);
        auto [tuples, s_end] =
            sample_offpolicy(mdp, behavior.pi_b, s_cur, chunk, rng);
        s_cur = s_end;
        for (const OffPolicyTuple& tp : tuples) {
          if (sink != nullptr) sink->on_offpolicy(k, t, tp);
          const double c = weights.at(t);
          if (c != 0.0) {
            const int i = mdp.idx(tp.s, tp.a);
            delta_bar(i) += c * (tp.r + mdp.gamma * w_next(tp.s_next) - q(i));
          }
          ++t;
        }
      }
      samples_cum += b_k;
      omega_bar =
          delta_bar -
          behavior.sigma.cwiseProduct(bellman_q(mdp, pi_next, q) - q).eval();
    }

    IterationRecord rec;
    rec.k = k;
    rec.pi_k = pi;
    rec.eta_k = eta_k;
    rec.b_k = b_k;
    rec.samples_cumulative = samples_cum;
    if (full) {
      rec.q_k = q;
      rec.delta_bar = delta_bar;
      rec.omega_bar = omega_bar;
    }
    run.trace.push_back(std::move(rec));

    q += cfg.alpha * delta_bar;
    run.q_min_seen = std::min(run.q_min_seen, q.minCoeff());
    run.q_max_seen = std::max(run.q_max_seen, q.maxCoeff());
    pi = pi_next;
  }

  run.final_pi = pi;
  run.final_q = q;
  run.pi_K = run.trace.back().pi_k;
  run.hat_index = rng.uniform_int(K + 1);
  run.pi_hat = run.trace[static_cast<std::size_t>(run.hat_index)].pi_k;
  run.total_samples = samples_cum;
  return run;
}

/**
 * The same actor-critic recursion driven by the composed behavior/target
 * chain: tuples carry a sampled next action from the freshly improved actor,
 * and the error uses that sampled action instead of an expectation.
 *
 * Each iteration recomputes the composed chain's stationary weights from a
 * cold start (reproducible bit for bit), tracks their running minimum, and
 * every few iterations probes the chain's mixing envelope; the most
 * conservative probe results are reported.  Throws NotErgodic the moment a
 * composed chain stops being ergodic.
 */
inline RunResult run_approximate_td_pmd(const TabularMdp& mdp,
                                        const Policy& pi_b,
                                        const AlgoConfig& cfg, SplitRng& rng,
                                        TupleSink* sink = nullptr) {
  detail::validate_config_common(mdp, cfg);
  validate_policy(pi_b, mdp.num_states, mdp.num_actions, "behavior policy");
  if (!(pi_b.probs.minCoeff() > 0.0)) {
    throw ExplorationFailure(
        "behavior policy puts zero mass on some action; every state-action "
        "pair must be reachable");
  }
  const int S = mdp.num_states;
  const int A = mdp.num_actions;
  const int SA = S * A;
  const int K = cfg.num_iterations;
  const bool full = cfg.trace_mode == TraceMode::Full;
  const int stride = cfg.mixing_probe_stride > 0
                         ? cfg.mixing_probe_stride
                         : std::max(1, (K + 1 + 19) / 20);

  RunResult run;
  run.config = cfg;
  run.trace.reserve(static_cast<std::size_t>(K) + 1);
  run.sigma_floor_run = std::numeric_limits<double>::infinity();
  run.probe_m = 0.0;
  run.probe_kappa = 0.0;

  Policy pi = detail::resolve_initial_policy(mdp, cfg);
  QVec q = QVec::Zero(SA);
  int s_cur = cfg.initial_state;
  long long samples_cum = 0;

  for (int k = 0; k <= K; ++k) {
    const double eta_k = detail::resolve_eta(cfg, pi, q, S, A);
    const Policy pi_next = pmd_step_policy(cfg.map, pi, q, eta_k);
    const long long b_k = cfg.batches.at(k);

    const Matrix composed = compose_s(mdp, pi_b, pi_next);
    const StateDist nu_k = stationary_dist(composed);
    StateActionDist sigma_k(SA);
    for (int s = 0; s < S; ++s) {
      for (int a = 0; a < A; ++a) {
        sigma_k(mdp.idx(s, a)) = nu_k(s) * pi_b.probs(s, a);
      }
    }
    const double floor_k = sigma_k.minCoeff();
    if (!(floor_k > 0.0)) {
      throw ExplorationFailure(
          "composed chain's stationary weights vanish somewhere");
    }
    run.sigma_floor_run = std::min(run.sigma_floor_run, floor_k);
    if (k % stride == 0) {
      const MixingEstimate probe = estimate_mixing(composed, nu_k);
      run.probe_m = std::max(run.probe_m, probe.m);
      run.probe_kappa = std::max(run.probe_kappa, probe.kappa);
    }

    QVec delta_bar = QVec::Zero(SA);
    QVec omega_bar;
    if (cfg.noise_free) {
      delta_bar = sigma_k.cwiseProduct(bellman_q(mdp, pi_next, q) - q);
      omega_bar = QVec::Zero(SA);
    } else {
      const detail::BatchWeights weights(cfg.theta, b_k);
      long long t = 0;
      while (t < b_k) {
        const long long chunk = std::min(detail::kSampleChunk, b_k - t);
        auto [tuples, s_end] =
            sample_mixed(mdp, pi_b, pi_next, s_cur, chunk, rng);
        s_cur = s_end;
        for (const MixedTuple& tp : tuples) {
          if (sink != nullptr) sink->on_mixed(k, t, tp);
          const double c = weights.at(t);
          if (c != 0.0) {
            const int i = mdp.idx(tp.s, tp.a);
            delta_bar(i) +=
                c * (tp.r + mdp.gamma * q(mdp.idx(tp.s_next, tp.a_next)) -
                     q(i));
          }
          ++t;
        }
      }
      samples_cum += b_k;
      omega_bar =
          delta_bar -
          sigma_k.cwiseProduct(bellman_q(mdp, pi_next, q) - q).eval();
    }

    IterationRecord rec;
    rec.k = k;
    rec.pi_k = pi;
    rec.eta_k = eta_k;
    rec.b_k = b_k;
    rec.samples_cumulative = samples_cum;
    if (full) {
      rec.q_k = q;
      rec.delta_bar = delta_bar;
      rec.omega_bar = omega_bar;
      rec.sigma_k = sigma_k;
    }
    run.trace.push_back(std::move(rec));

    q += cfg.alpha * delta_bar;
    run.q_min_seen = std::min(run.q_min_seen, q.minCoeff());
    run.q_max_seen = std::max(run.q_max_seen, q.maxCoeff());
    pi = pi_next;
  }

  run.final_pi = pi;
  run.final_q = q;
  run.pi_K = run.trace.back().pi_k;
  run.hat_index = rng.uniform_int(K + 1);
  run.pi_hat = run.trace[static_cast<std::size_t>(run.hat_index)].pi_k;
  run.total_samples = samples_cum;
  return run;
}

/**
 * Incremental greedy-target recursion on off-policy tuples: per iteration
 * k = 0..K-1 a batch is drawn along the behavior chain, per-tuple errors use
 * the greedy value at the next state, and the critic moves by alpha times
 * the uniform batch average (theta must be 1).  There is no explicit actor;
 * recorded policies are the greedy ones, and no iteration index is drawn at
 * the end, so the generator sees exactly the sampling draws.
 */
inline RunResult run_batch_q_learning(const TabularMdp& mdp,
                                      const BehaviorModel& behavior,
                                      const AlgoConfig& cfg, SplitRng& rng,
                                      TupleSink* sink = nullptr) {
  detail::validate_config_common(mdp, cfg);
  validate_policy(behavior.pi_b, mdp.num_states, mdp.num_actions,
                  "behavior policy");
  if (!(behavior.sigma_floor > 0.0)) {
    throw ExplorationFailure(
        "behavior model has vanishing stationary weights");
  }
  if (cfg.theta != 1.0) {
    throw ValidationError("batch-q averaging requires theta = 1");
  }
  const int S = mdp.num_states;
  const int A = mdp.num_actions;
  const int SA = S * A;
  const int K = cfg.num_iterations;
  const bool full = cfg.trace_mode == TraceMode::Full;

  RunResult run;
  run.config = cfg;
  run.trace.reserve(static_cast<std::size_t>(K));
  run.sigma_floor_run = behavior.sigma_floor;

  QVec q = QVec::Zero(SA);
  int s_cur = cfg.initial_state;
  long long samples_cum = 0;

  for (int k = 0; k < K; ++k) {
    const long long b_k = cfg.batches.at(k);
    QVec delta_bar = QVec::Zero(SA);
    QVec omega_bar;
    if (cfg.noise_free) {
      delta_bar =
          behavior.sigma.cwiseProduct(optimal_bellman_q(mdp, q) - q);
      omega_bar = QVec::Zero(SA);
    } else {
      const double inv_b = 1.0 / static_cast<double>(b_k);
      const VVec w_next = max_state_values(q, S, A);
      long long t = 0;
      while (t < b_k) {
        const long long chunk = std::min(detail::kSampleChunk, b_k - t);
        auto [tuples, s_end] =
            sample_offpolicy(mdp, behavior.pi_b, s_cur, chunk, rng);
        s_cur = s_end;
        for (const OffPolicyTuple& tp : tuples) {
          if (sink != nullptr) sink->on_offpolicy(k, t, tp);
          const int i = mdp.idx(tp.s, tp.a);
          delta_bar(i) += inv_b * (tp.r + mdp.gamma * w_next(tp.s_next) - q(i));
          ++t;
        }
      }
      samples_cum += b_k;
      omega_bar =
          delta_bar -
          behavior.sigma.cwiseProduct(optimal_bellman_q(mdp, q) - q).eval();
    }

    IterationRecord rec;
    rec.k = k;
    rec.pi_k = greedy_policy(q, S, A);
    rec.eta_k = 0.0;
    rec.b_k = b_k;
    rec.samples_cumulative = samples_cum;
    if (full) {
      rec.q_k = q;
      rec.delta_bar = delta_bar;
      rec.omega_bar = omega_bar;
    }
    run.trace.push_back(std::move(rec));

    q += cfg.alpha * delta_bar;
    run.q_min_seen = std::min(run.q_min_seen, q.minCoeff());
    run.q_max_seen = std::max(run.q_max_seen, q.maxCoeff());
  }

  run.final_q = q;
  run.final_pi = greedy_policy(q, S, A);
  run.pi_K = run.final_pi;
  run.pi_hat = run.final_pi;
  run.hat_index = K;
  run.total_samples = samples_cum;
  return run;
}

}  // namespace pmdlab

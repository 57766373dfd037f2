#pragma once

#include <cstdio>
#include <fstream>
#include <initializer_list>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "algo.hpp"
#include "analysis.hpp"
#include "errors.hpp"
#include "harness.hpp"
#include "mdp.hpp"
#include "oracle.hpp"

namespace pmdlab {

using Json = nlohmann::json;

/// Doubles in CSV output carry 17 significant digits, enough to round-trip
/// bit for bit.
inline std::string format_g17(double x) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return std::string(buf);
}

/// Parses a JSON document from disk, converting parse failures into
/// validation errors that name the file.
inline Json load_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open file: " + path);
  try {
    return Json::parse(in);
  } catch (const Json::parse_error& e) {
    throw ValidationError("failed to parse " + path + ": " + e.what());
  }
}

inline void save_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot write file: " + path);
  out << text;
}

namespace detail {

/// Fail-closed key policy: every required key present, no key outside the
/// declared set.  `what` names the object in error messages.
inline void expect_keys(const Json& j,
                        std::initializer_list<const char*> required,
                        std::initializer_list<const char*> optional,
                        const std::string& what) {
  if (!j.is_object()) throw ValidationError(what + " must be a JSON object");
  for (const char* key : required) {
    if (!j.contains(key)) {
      throw ValidationError(what + ": missing required key \"" + key + "\"");
    }
  }
  for (const auto& item : j.items()) {
    bool known = false;
    for (const char* key : required) {
      if (item.key() == key) known = true;
    }
    for (const char* key : optional) {
      if (item.key() == key) known = true;
    }
    if (!known) {
      throw ValidationError(what + ": unknown key \"" + item.key() + "\"");
    }
  }
}

inline double as_number(const Json& j, const std::string& what) {
  if (!j.is_number()) throw ValidationError(what + " must be a number");
  return j.get<double>();
}

inline int as_int(const Json& j, const std::string& what) {
  if (!j.is_number_integer()) {
    throw ValidationError(what + " must be an integer");
  }
  return j.get<int>();
}

inline std::string as_string(const Json& j, const std::string& what) {
  if (!j.is_string()) throw ValidationError(what + " must be a string");
  return j.get<std::string>();
}

}  // namespace detail

inline Json policy_to_json(const Policy& pi) {
  Json rows = Json::array();
  for (int s = 0; s < pi.num_states(); ++s) {
    Json row = Json::array();
    for (int a = 0; a < pi.num_actions(); ++a) row.push_back(pi.probs(s, a));
    rows.push_back(std::move(row));
  }
  return rows;
}

inline Policy policy_from_json(const Json& j, int num_states, int num_actions,
                               const std::string& what) {
  if (!j.is_array() || static_cast<int>(j.size()) != num_states) {
    throw ValidationError(what + " must be an array of num_states rows");
  }
  Policy pi;
  pi.probs.resize(num_states, num_actions);
  for (int s = 0; s < num_states; ++s) {
    const Json& row = j[static_cast<std::size_t>(s)];
    if (!row.is_array() || static_cast<int>(row.size()) != num_actions) {
      throw ValidationError(what + " row " + std::to_string(s) +
                            " must have num_actions entries");
    }
    for (int a = 0; a < num_actions; ++a) {
      pi.probs(s, a) = detail::as_number(
          row[static_cast<std::size_t>(a)],
          what + "[" + std::to_string(s) + "][" + std::to_string(a) + "]");
    }
  }
  validate_policy(pi, num_states, num_actions, what);
  return pi;
}

inline Json vector_to_json(const Vector& v) {
  Json out = Json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v(i));
  return out;
}

inline Json mdp_to_json(const TabularMdp& mdp) {
  Json j;
  j["num_states"] = mdp.num_states;
  j["num_actions"] = mdp.num_actions;
  j["gamma"] = mdp.gamma;
  Json trans = Json::array();
  for (int s = 0; s < mdp.num_states; ++s) {
    Json per_action = Json::array();
    for (int a = 0; a < mdp.num_actions; ++a) {
      Json row = Json::array();
      for (int sp = 0; sp < mdp.num_states; ++sp) {
        row.push_back(mdp.transitions(mdp.idx(s, a), sp));
      }
      per_action.push_back(std::move(row));
    }
    trans.push_back(std::move(per_action));
  }
  j["transitions"] = std::move(trans);
  Json rew = Json::array();
  for (int s = 0; s < mdp.num_states; ++s) {
    Json row = Json::array();
    for (int a = 0; a < mdp.num_actions; ++a) row.push_back(mdp.rewards(s, a));
    rew.push_back(std::move(row));
  }
  j["rewards"] = std::move(rew);
  return j;
}

inline TabularMdp mdp_from_json(const Json& j) {
  detail::expect_keys(
      j, {"num_states", "num_actions", "gamma", "transitions", "rewards"}, {},
      "decision process");
  TabularMdp mdp;
  mdp.num_states = detail::as_int(j["num_states"], "num_states");
  mdp.num_actions = detail::as_int(j["num_actions"], "num_actions");
  mdp.gamma = detail::as_number(j["gamma"], "gamma");
  if (mdp.num_states < 1 || mdp.num_actions < 1) {
    throw ValidationError("num_states and num_actions must be >= 1");
  }
  const Json& trans = j["transitions"];
  if (!trans.is_array() || static_cast<int>(trans.size()) != mdp.num_states) {
    throw ValidationError("transitions must be an array of num_states entries");
  }
  mdp.transitions.resize(mdp.num_states * mdp.num_actions, mdp.num_states);
  for (int s = 0; s < mdp.num_states; ++s) {
    const Json& per_action = trans[static_cast<std::size_t>(s)];
    if (!per_action.is_array() ||
        static_cast<int>(per_action.size()) != mdp.num_actions) {
      throw ValidationError("transitions[" + std::to_string(s) +
                            "] must have num_actions entries");
    }
    for (int a = 0; a < mdp.num_actions; ++a) {
      const Json& row = per_action[static_cast<std::size_t>(a)];
      if (!row.is_array() || static_cast<int>(row.size()) != mdp.num_states) {
        throw ValidationError("transitions[" + std::to_string(s) + "][" +
                              std::to_string(a) +
                              "] must have num_states entries");
      }
      for (int sp = 0; sp < mdp.num_states; ++sp) {
        mdp.transitions(mdp.idx(s, a), sp) = detail::as_number(
            row[static_cast<std::size_t>(sp)],
            "transitions[" + std::to_string(s) + "][" + std::to_string(a) +
                "][" + std::to_string(sp) + "]");
      }
    }
  }
  const Json& rew = j["rewards"];
  if (!rew.is_array() || static_cast<int>(rew.size()) != mdp.num_states) {
    throw ValidationError("rewards must be an array of num_states entries");
  }
  mdp.rewards.resize(mdp.num_states, mdp.num_actions);
  for (int s = 0; s < mdp.num_states; ++s) {
    const Json& row = rew[static_cast<std::size_t>(s)];
    if (!row.is_array() || static_cast<int>(row.size()) != mdp.num_actions) {
      throw ValidationError("rewards[" + std::to_string(s) +
                            "] must have num_actions entries");
    }
    for (int a = 0; a < mdp.num_actions; ++a) {
      mdp.rewards(s, a) = detail::as_number(
          row[static_cast<std::size_t>(a)],
          "rewards[" + std::to_string(s) + "][" + std::to_string(a) + "]");
    }
  }
  validate_mdp(mdp);
  return mdp;
}

inline Json solution_to_json(const OptimalSolution& sol) {
  Json j;
  j["q_star"] = vector_to_json(sol.q_star);
  j["v_star"] = vector_to_json(sol.v_star);
  j["pi_star"] = policy_to_json(sol.pi_star);
  j["residual"] = sol.residual;
  j["iterations"] = sol.iterations;
  return j;
}

/// A parsed run request: the algorithm configuration plus the behavior
/// policy it runs against (uniform when the file does not name one).
struct RunSpec {
  AlgoConfig config;
  Policy behavior;
};

inline AlgoKind algo_kind_from_string(const std::string& name) {
  if (name == "expected") return AlgoKind::Expected;
  if (name == "approximate") return AlgoKind::Approximate;
  if (name == "batch-q") return AlgoKind::BatchQ;
  throw ValidationError(
      "algo_kind must be \"expected\", \"approximate\", or \"batch-q\"");
}

inline MirrorMap mirror_from_string(const std::string& name) {
  if (name == "negative-entropy") return MirrorMap::negative_entropy();
  if (name == "squared-l2") return MirrorMap::squared_l2();
  throw ValidationError(
      "map must be \"negative-entropy\" or \"squared-l2\"");
}

inline EtaMode eta_mode_from_string(const std::string& name) {
  if (name == "constant") return EtaMode::Constant;
  if (name == "adaptive") return EtaMode::Adaptive;
  if (name == "qlearning-equiv") return EtaMode::QlearningEquiv;
  throw ValidationError(
      "eta_mode must be \"constant\", \"adaptive\", or \"qlearning-equiv\"");
}

inline RunSpec run_spec_from_json(const Json& j, const TabularMdp& mdp) {
  detail::expect_keys(j,
                      {"algo_kind", "map", "K", "alpha", "eta_mode", "eta",
                       "batch_schedule", "theta", "seed", "noise_free"},
                      {"initial_state", "behavior_policy", "initial_policy",
                       "trace", "mixing_probe_stride"},
                      "run config");
  RunSpec spec;
  AlgoConfig& cfg = spec.config;
  cfg.kind = algo_kind_from_string(detail::as_string(j["algo_kind"], "algo_kind"));
  cfg.map = mirror_from_string(detail::as_string(j["map"], "map"));
  cfg.num_iterations = detail::as_int(j["K"], "K");
  cfg.alpha = detail::as_number(j["alpha"], "alpha");
  cfg.eta_mode = eta_mode_from_string(detail::as_string(j["eta_mode"], "eta_mode"));
  cfg.eta_base = detail::as_number(j["eta"], "eta");
  const Json& sched = j["batch_schedule"];
  if (sched.is_number_integer()) {
    cfg.batches = BatchSchedule::constant(sched.get<long long>());
  } else if (sched.is_array()) {
    std::vector<long long> sizes;
    for (const Json& item : sched) {
      if (!item.is_number_integer()) {
        throw ValidationError("batch_schedule entries must be integers");
      }
      sizes.push_back(item.get<long long>());
    }
    if (sizes.empty()) throw ValidationError("batch_schedule must be non-empty");
    cfg.batches.sizes = std::move(sizes);
  } else {
    throw ValidationError("batch_schedule must be an integer or integer array");
  }
  cfg.theta = detail::as_number(j["theta"], "theta");
  if (!j["seed"].is_number_unsigned() && !j["seed"].is_number_integer()) {
    throw ValidationError("seed must be a nonnegative integer");
  }
  cfg.seed = j["seed"].get<std::uint64_t>();
  if (!j["noise_free"].is_boolean()) {
    throw ValidationError("noise_free must be a boolean");
  }
  cfg.noise_free = j["noise_free"].get<bool>();
  if (j.contains("initial_state")) {
    cfg.initial_state = detail::as_int(j["initial_state"], "initial_state");
  }
  if (j.contains("trace")) {
    const std::string mode = detail::as_string(j["trace"], "trace");
    if (mode == "full") {
      cfg.trace_mode = TraceMode::Full;
    } else if (mode == "light") {
      cfg.trace_mode = TraceMode::Light;
    } else {
      throw ValidationError("trace must be \"full\" or \"light\"");
    }
  }
  if (j.contains("mixing_probe_stride")) {
    cfg.mixing_probe_stride =
        detail::as_int(j["mixing_probe_stride"], "mixing_probe_stride");
  }
  if (j.contains("initial_policy")) {
    cfg.initial_policy = policy_from_json(j["initial_policy"], mdp.num_states,
                                          mdp.num_actions, "initial_policy");
  }
  if (j.contains("behavior_policy")) {
    spec.behavior = policy_from_json(j["behavior_policy"], mdp.num_states,
                                     mdp.num_actions, "behavior_policy");
  } else {
    spec.behavior = uniform_policy(mdp.num_states, mdp.num_actions);
  }
  return spec;
}

/**
 * Per-iteration diagnostics table.  One row per recorded iteration:
 * k, eta_k, b_k, samples_cum, the actor's value suboptimality under the
 * uniform initial distribution, the critic's distance to the optimal table,
 * the critic's distance to the actor's true values, and the noise level.
 * Greedy-target runs get one extra synthesized row for the final critic.
 * Requires a full trace.
 */
inline void write_run_csv(std::ostream& out, const TabularMdp& mdp,
                          const RunResult& run, const OptimalSolution& sol) {
  const StateDist mu = StateDist::Constant(
      mdp.num_states, 1.0 / static_cast<double>(mdp.num_states));
  out << "k,eta_k,b_k,samples_cum,subopt_V,qstar_gap,critic_gap,omega_inf\n";
  auto emit_row = [&](int k, double eta_k, long long b_k, long long samples,
                      const Policy& pi_k, const QVec& q_k,
                      const QVec* omega) {
    const auto [v_pi, q_pi] = policy_value(mdp, pi_k);
    const double subopt = mu.dot(sol.v_star - v_pi);
    const double qstar_gap = (sol.q_star - q_k).lpNorm<Eigen::Infinity>();
    const double critic_gap = (q_pi - q_k).lpNorm<Eigen::Infinity>();
    const double omega_inf =
        omega != nullptr ? omega->lpNorm<Eigen::Infinity>() : 0.0;
    out << k << ',' << format_g17(eta_k) << ',' << b_k << ',' << samples << ','
        << format_g17(subopt) << ',' << format_g17(qstar_gap) << ','
        << format_g17(critic_gap) << ',' << format_g17(omega_inf) << '\n';
  };
  for (const IterationRecord& rec : run.trace) {
    if (rec.q_k.size() == 0) {
      throw ValidationError(
          "write_run_csv: requires a full trace (rerun with trace=\"full\")");
    }
    emit_row(rec.k, rec.eta_k, rec.b_k, rec.samples_cumulative, rec.pi_k,
             rec.q_k, rec.omega_bar.size() ? &rec.omega_bar : nullptr);
  }
  if (run.config.kind == AlgoKind::BatchQ) {
    emit_row(run.config.num_iterations, 0.0, 0, run.total_samples,
             run.final_pi, run.final_q, nullptr);
  }
}

/// Streams sampled tuples to CSV as they are drawn.
class TrajectoryCsvSink : public TupleSink {
 public:
  TrajectoryCsvSink(std::ostream& out, bool with_next_action)
      : out_(out), with_next_action_(with_next_action) {
    out_ << (with_next_action_ ? "k,t,s,a,r,s_next,a_next\n"
                               : "k,t,s,a,r,s_next\n");
  }
  void on_offpolicy(int k, long long t, const OffPolicyTuple& tp) override {
    out_ << k << ',' << t << ',' << tp.s << ',' << tp.a << ','
         << format_g17(tp.r) << ',' << tp.s_next << '\n';
  }
  void on_mixed(int k, long long t, const MixedTuple& tp) override {
    out_ << k << ',' << t << ',' << tp.s << ',' << tp.a << ','
         << format_g17(tp.r) << ',' << tp.s_next << ',' << tp.a_next << '\n';
  }

 private:
  std::ostream& out_;
  bool with_next_action_;
};

inline Json report_to_json(const PropertyReport& report) {
  Json out = Json::array();
  for (const PropertyCheck& check : report.checks) {
    Json entry;
    entry["lemma"] = check.lemma;
    entry["pass"] = check.pass;
    entry["measured"] = check.measured;
    entry["bound"] = check.bound;
    out.push_back(std::move(entry));
  }
  return out;
}

inline Json decomposition_to_json(const BiasDecomposition& dec) {
  Json j;
  j["state"] = dec.state;
  j["upto"] = dec.upto;
  j["lhs"] = dec.lhs;
  j["b0"] = dec.b0;
  j["c"] = dec.c;
  j["d"] = dec.d;
  j["e"] = dec.e;
  j["f"] = dec.f;
  j["reconstruction"] = dec.reconstruction;
  j["residual"] = dec.residual;
  return j;
}

inline GarnetSpec garnet_from_json(const Json& j) {
  detail::expect_keys(
      j, {"num_states", "num_actions", "branching", "seed", "gamma"}, {},
      "garnet spec");
  GarnetSpec spec;
  spec.num_states = detail::as_int(j["num_states"], "num_states");
  spec.num_actions = detail::as_int(j["num_actions"], "num_actions");
  spec.branching = detail::as_int(j["branching"], "branching");
  if (!j["seed"].is_number_unsigned() && !j["seed"].is_number_integer()) {
    throw ValidationError("seed must be a nonnegative integer");
  }
  spec.seed = j["seed"].get<std::uint64_t>();
  spec.gamma = detail::as_number(j["gamma"], "gamma");
  return spec;
}

}  // namespace pmdlab

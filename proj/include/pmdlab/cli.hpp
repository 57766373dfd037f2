#pragma once

#include <cerrno>
#include <cstdint>
#include <limits>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "algo.hpp"
#include "analysis.hpp"
#include "chain.hpp"
#include "errors.hpp"
#include "harness.hpp"
#include "io.hpp"
#include "mdp.hpp"
#include "oracle.hpp"
#include "rng.hpp"

namespace pmdlab {
namespace cli {

/// PMDLAB_SEED overrides any seed given on the command line or in config
/// files.  Empty or absent means no override.
inline std::optional<std::uint64_t> env_seed_override() {
  const char* raw = std::getenv("PMDLAB_SEED");
  if (raw == nullptr || raw[0] == '\0') return std::nullopt;
  errno = 0;
  char* end = nullptr;
  unsigned long long value = std::strtoull(raw, &end, 10);
  if (errno != 0 || end == raw || *end != '\0') {
    throw ValidationError("PMDLAB_SEED must be a nonnegative integer");
  }
  return static_cast<std::uint64_t>(value);
}

inline std::uint64_t resolve_seed(const std::optional<std::uint64_t>& flag,
                                  std::uint64_t fallback) {
  if (auto env = env_seed_override()) return *env;
  if (flag) return *flag;
  return fallback;
}

inline void write_json_file(const std::string& path, const Json& j) {
  save_text(path, j.dump(2) + "\n");
}

/// Keeps sweep artifact names shell-friendly.
inline std::string sanitize_name(const std::string& name) {
  std::string out;
  for (char c : name) {
    const bool ok = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') ||
                    (c >= '0' && c <= '9') || c == '-' || c == '_';
    out.push_back(ok ? c : '-');
  }
  return out.empty() ? std::string("algo") : out;
}

struct GenOptions {
  int num_states = 6;
  int num_actions = 3;
  int branching = 3;
  double gamma = 0.9;
  std::optional<std::uint64_t> seed;
  std::string out;
};

inline int cmd_gen(const GenOptions& opt) {
  GarnetSpec spec;
  spec.num_states = opt.num_states;
  spec.num_actions = opt.num_actions;
  spec.branching = opt.branching;
  spec.gamma = opt.gamma;
  spec.seed = resolve_seed(opt.seed, 1);
  const TabularMdp mdp = gen_garnet(spec);
  const Json j = mdp_to_json(mdp);
  if (opt.out.empty()) {
    std::cout << j.dump(2) << '\n';
  } else {
    write_json_file(opt.out, j);
  }
  return 0;
}

struct SolveOptions {
  std::string mdp_path;
  double tol = 1e-10;
  std::string out;
};

inline int cmd_solve(const SolveOptions& opt) {
  const TabularMdp mdp = mdp_from_json(load_json(opt.mdp_path));
  const OptimalSolution sol = value_iteration(mdp, opt.tol);
  const Json j = solution_to_json(sol);
  if (opt.out.empty()) {
    std::cout << j.dump(2) << '\n';
  } else {
    write_json_file(opt.out, j);
  }
  return 0;
}

struct RunOptions {
  std::string mdp_path;
  std::string config_path;
  std::string out_csv;
  std::string out_json;
  std::string trajectories;
  std::optional<std::uint64_t> seed;
};

inline RunResult dispatch_run(const TabularMdp& mdp, const RunSpec& spec,
                              SplitRng& rng, TupleSink* sink) {
  switch (spec.config.kind) {
    case AlgoKind::Expected: {
      const BehaviorModel behavior = make_behavior(mdp, spec.behavior);
      return run_expected_td_pmd(mdp, behavior, spec.config, rng, sink);
    }
    case AlgoKind::Approximate:
      return run_approximate_td_pmd(mdp, spec.behavior, spec.config, rng, sink);
    case AlgoKind::BatchQ: {
      const BehaviorModel behavior = make_behavior(mdp, spec.behavior);
      return run_batch_q_learning(mdp, behavior, spec.config, rng, sink);
    }
  }
  throw ValidationError("unknown algorithm kind");
}

inline int cmd_run(const RunOptions& opt) {
  const TabularMdp mdp = mdp_from_json(load_json(opt.mdp_path));
  RunSpec spec = run_spec_from_json(load_json(opt.config_path), mdp);
  spec.config.seed = resolve_seed(opt.seed, spec.config.seed);

  std::ofstream traj_stream;
  std::optional<TrajectoryCsvSink> sink;
  if (!opt.trajectories.empty()) {
    traj_stream.open(opt.trajectories, std::ios::binary);
    if (!traj_stream) {
      throw ValidationError("cannot write file: " + opt.trajectories);
    }
    sink.emplace(traj_stream, spec.config.kind == AlgoKind::Approximate);
  }

  SplitRng rng(spec.config.seed, 0);
  const RunResult run =
      dispatch_run(mdp, spec, rng, sink ? &*sink : nullptr);

  if (!opt.out_csv.empty()) {
    const OptimalSolution sol = value_iteration(mdp);
    std::ofstream csv(opt.out_csv, std::ios::binary);
    if (!csv) throw ValidationError("cannot write file: " + opt.out_csv);
    write_run_csv(csv, mdp, run, sol);
  }
  if (!opt.out_json.empty()) {
    Json j;
    j["algo"] = algo_name(run.config.kind);
    j["map"] = mirror_name(run.config.map.kind);
    j["hat_index"] = run.hat_index;
    j["total_samples"] = run.total_samples;
    j["sigma_floor_run"] = run.sigma_floor_run;
    j["q_min_seen"] = run.q_min_seen;
    j["q_max_seen"] = run.q_max_seen;
    j["probe_m"] = run.probe_m;
    j["probe_kappa"] = run.probe_kappa;
    j["final_q"] = vector_to_json(run.final_q);
    j["pi_K"] = policy_to_json(run.pi_K);
    j["pi_hat"] = policy_to_json(run.pi_hat);
    write_json_file(opt.out_json, j);
  }
  return 0;
}

struct CheckOptions {
  std::string mdp_path;
  int num_states = 6;
  int num_actions = 3;
  int branching = 3;
  double gamma = 0.9;
  std::uint64_t garnet_seed = 1;
  std::optional<std::uint64_t> seed;
  int num_seeds = 8;
  double alpha = 1.0;
  std::string map_name = "negative-entropy";
  std::string out = "report.json";
};

inline int cmd_check(const CheckOptions& opt) {
  TabularMdp mdp;
  if (!opt.mdp_path.empty()) {
    mdp = mdp_from_json(load_json(opt.mdp_path));
  } else {
    GarnetSpec spec;
    spec.num_states = opt.num_states;
    spec.num_actions = opt.num_actions;
    spec.branching = opt.branching;
    spec.gamma = opt.gamma;
    spec.seed = opt.garnet_seed;
    mdp = gen_garnet(spec);
  }
  const std::uint64_t base = resolve_seed(opt.seed, 1);
  if (opt.num_seeds < 1) throw ValidationError("--num-seeds must be >= 1");
  std::vector<std::uint64_t> seeds;
  for (int i = 0; i < opt.num_seeds; ++i) {
    seeds.push_back(base + static_cast<std::uint64_t>(i));
  }
  const Policy pi_b = uniform_policy(mdp.num_states, mdp.num_actions);
  const MirrorMap map = mirror_from_string(opt.map_name);
  const PropertyReport report =
      run_property_suite(mdp, pi_b, map, seeds, opt.alpha);
  for (const PropertyCheck& check : report.checks) {
    std::cout << (check.pass ? "PASS" : "FAIL") << ' ' << check.lemma
              << " (measured=" << format_g17(check.measured)
              << ", bound=" << format_g17(check.bound) << ")\n";
  }
  if (!opt.out.empty()) {
    write_json_file(opt.out, report_to_json(report));
  }
  const bool ok = report.all_pass();
  std::cout << (ok ? "all checks passed" : "some checks FAILED") << '\n';
  return ok ? 0 : 1;
}

struct SweepOptions {
  std::string spec_path;
  std::string out_dir;
  std::optional<std::uint64_t> seed;
};

inline int cmd_sweep(const SweepOptions& opt) {
  const Json spec = load_json(opt.spec_path);
  detail::expect_keys(spec, {"algos", "seeds"},
                      {"mdp", "garnet", "epsilons", "batch_scale",
                       "output_dir"},
                      "sweep spec");
  if (spec.contains("mdp") == spec.contains("garnet")) {
    throw ValidationError(
        "sweep spec: provide exactly one of \"mdp\" and \"garnet\"");
  }
  TabularMdp mdp;
  if (spec.contains("mdp")) {
    mdp = mdp_from_json(
        load_json(detail::as_string(spec["mdp"], "sweep spec mdp")));
  } else {
    mdp = gen_garnet(garnet_from_json(spec["garnet"]));
  }

  std::string out_dir = opt.out_dir;
  if (out_dir.empty() && spec.contains("output_dir")) {
    out_dir = detail::as_string(spec["output_dir"], "output_dir");
  }
  if (out_dir.empty()) {
    throw ValidationError("sweep: no output directory (use --out-dir)");
  }
  std::filesystem::create_directories(out_dir);

  if (!spec["seeds"].is_array() || spec["seeds"].empty()) {
    throw ValidationError("sweep spec: \"seeds\" must be a non-empty array");
  }
  std::vector<std::uint64_t> seeds;
  for (const Json& item : spec["seeds"]) {
    if (!item.is_number_integer() && !item.is_number_unsigned()) {
      throw ValidationError("sweep spec: seeds must be integers");
    }
    seeds.push_back(item.get<std::uint64_t>());
  }
  if (auto env = env_seed_override()) {
    seeds.assign(1, *env);
  } else if (opt.seed) {
    seeds.assign(1, *opt.seed);
  }

  std::vector<double> epsilons;
  if (spec.contains("epsilons")) {
    if (!spec["epsilons"].is_array()) {
      throw ValidationError("sweep spec: \"epsilons\" must be an array");
    }
    for (const Json& item : spec["epsilons"]) {
      epsilons.push_back(detail::as_number(item, "epsilons entry"));
    }
  }
  double batch_scale = 1.0;
  if (spec.contains("batch_scale")) {
    batch_scale = detail::as_number(spec["batch_scale"], "batch_scale");
  }

  if (!spec["algos"].is_array() || spec["algos"].empty()) {
    throw ValidationError("sweep spec: \"algos\" must be a non-empty array");
  }
  struct AlgoEntry {
    std::string name;
    RunSpec spec;
  };
  std::vector<AlgoEntry> algos;
  for (const Json& item : spec["algos"]) {
    detail::expect_keys(item, {"config"}, {"name"}, "sweep algo entry");
    AlgoEntry entry;
    entry.spec = run_spec_from_json(item["config"], mdp);
    if (item.contains("name")) {
      entry.name = sanitize_name(detail::as_string(item["name"], "algo name"));
    } else {
      entry.name = sanitize_name(std::string(algo_name(entry.spec.config.kind)) +
                                 "-" + mirror_name(entry.spec.config.map.kind));
    }
    algos.push_back(std::move(entry));
  }

  const OptimalSolution sol = value_iteration(mdp);
  const StateDist mu = StateDist::Constant(
      mdp.num_states, 1.0 / static_cast<double>(mdp.num_states));

  std::ofstream summary(std::filesystem::path(out_dir) / "summary.csv",
                        std::ios::binary);
  if (!summary) throw ValidationError("cannot write sweep summary.csv");
  summary << "eps,algo,seeds,mean_subopt,total_samples\n";

  // With no epsilon grid the configs run exactly as written, once.
  const bool scheduled = !epsilons.empty();
  const std::size_t eps_cells = scheduled ? epsilons.size() : 1;
  for (std::size_t ei = 0; ei < eps_cells; ++ei) {
    for (std::size_t ai = 0; ai < algos.size(); ++ai) {
      RunSpec run_spec = algos[ai].spec;
      double eps = std::numeric_limits<double>::quiet_NaN();
      if (scheduled) {
        eps = epsilons[ei];
        const BehaviorModel behavior = make_behavior(mdp, run_spec.behavior);
        const Policy pi0 = detail::resolve_initial_policy(mdp, run_spec.config);
        const BoundInputs constants =
            extract_constants(mdp, behavior, run_spec.config.map, pi0,
                              sol.pi_star, run_spec.config.alpha);
        const ScheduleKind kind = run_spec.config.kind == AlgoKind::BatchQ
                                      ? ScheduleKind::BatchGreedy
                                      : ScheduleKind::AdaptiveStep;
        const ScheduleResult schedule = remark_schedules(
            kind, eps, constants, run_spec.config.theta, batch_scale);
        run_spec.config.num_iterations = schedule.num_iterations;
        run_spec.config.batches = schedule.batches;
        if (kind == ScheduleKind::AdaptiveStep) {
          run_spec.config.eta_mode = EtaMode::Constant;
          run_spec.config.eta_base = schedule.eta;
        }
      }
      const std::uint64_t stream =
          static_cast<std::uint64_t>(ei * algos.size() + ai);
      double subopt_sum = 0.0;
      long long samples_sum = 0;
      for (std::uint64_t seed : seeds) {
        run_spec.config.seed = seed;
        SplitRng rng(seed, stream);
        const RunResult run = dispatch_run(mdp, run_spec, rng, nullptr);
        const auto [v_final, q_final] = policy_value(mdp, run.final_pi);
        subopt_sum += mu.dot(sol.v_star - v_final);
        samples_sum += run.total_samples;
        const std::string file_name =
            (scheduled ? "eps" + std::to_string(ei) : std::string("plain")) +
            "_" + algos[ai].name + "_seed" + std::to_string(seed) + ".csv";
        std::ofstream csv(std::filesystem::path(out_dir) / file_name,
                          std::ios::binary);
        if (!csv) throw ValidationError("cannot write " + file_name);
        write_run_csv(csv, mdp, run, sol);
      }
      summary << format_g17(eps) << ',' << algos[ai].name << ','
              << seeds.size() << ','
              << format_g17(subopt_sum / static_cast<double>(seeds.size()))
              << ',' << samples_sum << '\n';
    }
  }
  return 0;
}

struct DecomposeOptions {
  std::string mdp_path;
  std::string config_path;
  int state = 0;
  int upto = -1;
  std::optional<std::uint64_t> seed;
  std::string out = "decomp.json";
};

inline int cmd_decompose(const DecomposeOptions& opt) {
  const TabularMdp mdp = mdp_from_json(load_json(opt.mdp_path));
  RunSpec spec = run_spec_from_json(load_json(opt.config_path), mdp);
  if (spec.config.kind == AlgoKind::BatchQ) {
    throw ValidationError(
        "decompose: only \"expected\" and \"approximate\" runs decompose");
  }
  spec.config.seed = resolve_seed(opt.seed, spec.config.seed);
  spec.config.trace_mode = TraceMode::Full;
  if (opt.state < 0 || opt.state >= mdp.num_states) {
    throw ValidationError("--state out of range");
  }
  const int upto =
      opt.upto >= 0 ? opt.upto : spec.config.num_iterations;
  if (upto < 1 || upto > spec.config.num_iterations) {
    throw ValidationError("--upto must be in [1, K]");
  }
  const BehaviorModel behavior = make_behavior(mdp, spec.behavior);
  SplitRng rng(spec.config.seed, 0);
  const RunResult run = dispatch_run(mdp, spec, rng, nullptr);
  const OptimalSolution sol = value_iteration(mdp);
  const BiasDecomposition dec =
      bias_decomposition(mdp, run, behavior, sol.pi_star, opt.state, upto);
  write_json_file(opt.out, decomposition_to_json(dec));
  std::cout << "residual " << format_g17(dec.residual) << '\n';
  return 0;
}

/// Entry point shared by the installed binary and the test harness.
inline int cli_main(int argc, char** argv) {
  CLI::App app{"tabular policy-mirror-descent lab"};
  app.require_subcommand(1);
  int rc = 0;

  GenOptions gen_opt;
  CLI::App* gen = app.add_subcommand("gen", "generate a random instance");
  gen->add_option("--states", gen_opt.num_states, "number of states");
  gen->add_option("--actions", gen_opt.num_actions, "number of actions");
  gen->add_option("--branching", gen_opt.branching,
                  "successor states per state-action pair");
  gen->add_option("--gamma", gen_opt.gamma, "discount factor");
  gen->add_option("--seed", gen_opt.seed, "generator seed");
  gen->add_option("--out", gen_opt.out, "output path (default stdout)");
  gen->callback([&] { rc = cmd_gen(gen_opt); });

  SolveOptions solve_opt;
  CLI::App* solve = app.add_subcommand("solve", "compute optimal values");
  solve->add_option("--mdp", solve_opt.mdp_path, "instance JSON")->required();
  solve->add_option("--tol", solve_opt.tol, "sup-norm tolerance");
  solve->add_option("--out", solve_opt.out, "output path (default stdout)");
  solve->callback([&] { rc = cmd_solve(solve_opt); });

  RunOptions run_opt;
  CLI::App* run = app.add_subcommand("run", "run one configured algorithm");
  run->add_option("--mdp", run_opt.mdp_path, "instance JSON")->required();
  run->add_option("--config", run_opt.config_path, "run config JSON")
      ->required();
  run->add_option("--out-csv", run_opt.out_csv, "per-iteration CSV path");
  run->add_option("--out-json", run_opt.out_json, "result JSON path");
  run->add_option("--trajectories", run_opt.trajectories,
                  "sampled-tuple CSV path");
  run->add_option("--seed", run_opt.seed, "seed override");
  run->callback([&] { rc = cmd_run(run_opt); });

  CheckOptions check_opt;
  CLI::App* check = app.add_subcommand("check", "run the invariant suite");
  check->add_option("--mdp", check_opt.mdp_path,
                    "instance JSON (default: generated instance)");
  check->add_option("--states", check_opt.num_states, "generated states");
  check->add_option("--actions", check_opt.num_actions, "generated actions");
  check->add_option("--branching", check_opt.branching,
                    "generated branching factor");
  check->add_option("--gamma", check_opt.gamma, "generated discount");
  check->add_option("--garnet-seed", check_opt.garnet_seed, "generator seed");
  check->add_option("--seed", check_opt.seed, "base seed for the suite");
  check->add_option("--num-seeds", check_opt.num_seeds, "seeds per check");
  check->add_option("--alpha", check_opt.alpha, "critic step size");
  check->add_option("--map", check_opt.map_name,
                    "negative-entropy or squared-l2");
  check->add_option("--out", check_opt.out, "report JSON path");
  check->callback([&] { rc = cmd_check(check_opt); });

  SweepOptions sweep_opt;
  CLI::App* sweep = app.add_subcommand("sweep", "run a config grid");
  sweep->add_option("--spec", sweep_opt.spec_path, "sweep spec JSON")
      ->required();
  sweep->add_option("--out-dir", sweep_opt.out_dir, "output directory");
  sweep->add_option("--seed", sweep_opt.seed, "replace the seed list");
  sweep->callback([&] { rc = cmd_sweep(sweep_opt); });

  DecomposeOptions dec_opt;
  CLI::App* dec = app.add_subcommand(
      "decompose", "split the actor gap of a run into tracked terms");
  dec->add_option("--mdp", dec_opt.mdp_path, "instance JSON")->required();
  dec->add_option("--config", dec_opt.config_path, "run config JSON")
      ->required();
  dec->add_option("--state", dec_opt.state, "probe state")->required();
  dec->add_option("--upto", dec_opt.upto, "iteration to decompose at");
  dec->add_option("--seed", dec_opt.seed, "seed override");
  dec->add_option("--out", dec_opt.out, "output JSON path");
  dec->callback([&] { rc = cmd_decompose(dec_opt); });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    std::cerr << "argument error: " << e.what() << '\n';
    return 1;
  } catch (const ValidationError& e) {
    std::cerr << "validation error: " << e.what() << '\n';
    return 1;
  } catch (const ExplorationFailure& e) {
    std::cerr << "assumption failure: " << e.what() << '\n';
    return 2;
  } catch (const NotErgodic& e) {
    std::cerr << "assumption failure: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return rc;
}

}  // namespace cli
}  // namespace pmdlab

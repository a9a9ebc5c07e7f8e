#pragma once

// Subcommands of the experiment runner. Each returns a process exit code:
// 0 success, 1 configuration error, 2 runtime error, 3 input/output error.

#include <json.hpp>

#include <algorithm>
#include <exception>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <optional>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include "wada/averaging.hpp"
#include "wada/cli/config.hpp"
#include "wada/data.hpp"
#include "wada/dynamics.hpp"
#include "wada/errors.hpp"
#include "wada/eval.hpp"
#include "wada/measures.hpp"
#include "wada/ot.hpp"

namespace wada::cli {

namespace fs = std::filesystem;

enum ExitCode : int { kOk = 0, kConfigError = 1, kRuntimeError = 2, kIoError = 3 };

struct Overrides {
  std::optional<std::string> out_dir;
  std::optional<unsigned> threads;
  std::optional<std::uint64_t> seed;
};

/// Runs `body`, printing any error to `err` and translating it into an exit code.
inline int guarded(std::ostream& err, const std::function<int()>& body) {
  try {
    return body();
  } catch (const InvalidConfig& e) {
    err << "config error: " << e.what() << '\n';
    return kConfigError;
  } catch (const OddCount& e) {
    err << "config error: " << e.what() << '\n';
    return kConfigError;
  } catch (const IoError& e) {
    err << "io error: " << e.what() << '\n';
    return kIoError;
  } catch (const ParseError& e) {
    err << "io error: " << e.what() << '\n';
    return kIoError;
  } catch (const OutOfBox& e) {
    err << "io error: " << e.what() << '\n';
    return kIoError;
  } catch (const fs::filesystem_error& e) {
    err << "io error: " << e.what() << '\n';
    return kIoError;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kRuntimeError;
  }
}

inline ExperimentConfig resolve(const std::string& config_path, const Overrides& ov) {
  auto cfg = to_experiment(load_config(config_path));
  if (ov.seed) cfg.reseed(*ov.seed);
  if (ov.threads) cfg.set_threads(*ov.threads);
  if (ov.out_dir) {
    cfg.out_dir = *ov.out_dir;
    cfg.resolved.set("output.dir", cfg.out_dir);
  }
  return cfg;
}

inline void write_file(const fs::path& path, const std::function<void(std::ostream&)>& fill) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot write '" + path.string() + "'");
  fill(os);
  if (!os) throw IoError("failed writing '" + path.string() + "'");
}

inline void make_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw IoError("cannot create output directory '" + dir.string() + "'");
}

namespace detail {

/// Number of columns in the header of a CSV file.
inline std::size_t csv_width(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open dataset file '" + path + "'");
  std::string header;
  if (!std::getline(in, header)) throw EmptyDataset();
  const auto n = csv::split(header).size();
  if (n < 2) throw ParseError(0, n, "a dataset needs at least one input column and a label");
  return n;
}

}  // namespace detail

struct Datasets {
  Dataset train;
  Dataset test;  // empty unless data.test_fraction > 0
};

inline Datasets build_datasets(const ExperimentConfig& cfg) {
  Dataset all;
  if (cfg.data.kind == "regression_1d")
    all = gen_regression_1d(cfg.data.n, cfg.data.noise, cfg.data_seed());
  else if (cfg.data.kind == "two_moons")
    all = gen_two_moons(cfg.data.n, cfg.data.noise, cfg.data_seed());
  else
    all = load_csv(cfg.data.path, default_data_box(detail::csv_width(cfg.data.path) - 1));
  if (cfg.data.bias_feature) all = with_bias_feature(all);
  if (cfg.data.test_fraction <= 0.0) return {std::move(all), Dataset{{}, {}, all.box}};
  auto [train, test] = shuffle_split(all, cfg.data.test_fraction, stream_seed(cfg.seed, "split"));
  if (train.size() == 0) throw InvalidConfig("data.test_fraction leaves no training points");
  return {std::move(train), std::move(test)};
}

inline InitSpec init_spec_for(const ExperimentConfig& cfg, const Dataset& train) {
  InitSpec spec = cfg.init;
  spec.theta_box = Box::cube(train.input_dim() + 1, -cfg.param_box, cfg.param_box);
  return spec;
}

inline nlohmann::ordered_json to_json(const NashGapReport& r) {
  nlohmann::ordered_json j;
  j["payoff_at_solution"] = r.payoff_at_solution;
  j["best_response_payoff_adv"] = r.best_response_payoff_adv;
  j["best_response_payoff_learner"] = r.best_response_payoff_learner;
  j["gap"] = r.gap;
  j["r_a"] = r.r_a;
  j["r_m"] = r.r_m;
  j["degenerate"] = r.degenerate;
  return j;
}

// ---------------------------------------------------------------------------
// train

inline int cmd_train(const std::string& config_path, const Overrides& ov, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const auto cfg = resolve(config_path, ov);
    const fs::path dir = cfg.out_dir;
    make_dir(dir);
    write_file(dir / "config.resolved.ini", [&](std::ostream& os) { cfg.resolved.write_ini(os); });

    const auto data = build_datasets(cfg);
    write_file(dir / "data.csv", [&](std::ostream& os) { write_csv(os, data.train); });
    if (data.test.size() > 0) write_file(dir / "test.csv", [&](std::ostream& os) { write_csv(os, data.test); });

    auto state = init_state(data.train, init_spec_for(cfg, data.train));
    Averager averager(cfg.averaging);
    RunHooks hooks;
    hooks.averager = &averager;
    hooks.keep_snapshots = cfg.snapshots;
    const auto trace = run(std::move(state), cfg.payoff, cfg.solver, hooks);

    write_file(dir / "trace.csv", [&](std::ostream& os) { write_trace_csv(os, trace.rows); });
    if (cfg.snapshots) {
      make_dir(dir / "snapshots");
      for (const auto& s : trace.snapshots) {
        const std::string stem = "snap_" + std::to_string(s.step);
        write_file(dir / "snapshots" / (stem + "_pi.csv"), [&](std::ostream& os) { write_csv(os, s.pi); });
        write_file(dir / "snapshots" / (stem + "_nu.csv"), [&](std::ostream& os) { write_csv(os, s.nu); });
      }
    }
    const auto avg = averager.finalize();
    write_file(dir / "avg_pi.csv", [&](std::ostream& os) { write_csv(os, avg.pi_bar); });
    write_file(dir / "avg_nu.csv", [&](std::ostream& os) { write_csv(os, avg.nu_bar); });
    write_file(dir / "final_pi.csv", [&](std::ostream& os) { write_csv(os, trace.final_state.pi); });
    write_file(dir / "final_nu.csv", [&](std::ostream& os) { write_csv(os, trace.final_state.nu); });

    nlohmann::ordered_json report;
    report["steps"] = trace.final_state.t;
    report["snapshots_averaged"] = avg.snapshots_used;
    report["final_payoff"] = trace.rows.back().payoff;
    if (cfg.eval.nash_gap) {
      const auto gap = nash_gap(avg.pi_bar, avg.nu_bar, cfg.payoff, cfg.eval.nash);
      report["nash_gap"] = to_json(gap);
      out << "gap " << gap.gap << "  r_a " << gap.r_a << "  r_m " << gap.r_m << '\n';
    }
    write_file(dir / "report.json", [&](std::ostream& os) { os << report.dump(2) << '\n'; });
    out << "steps " << trace.final_state.t << "  payoff " << trace.rows.back().payoff << "  -> " << dir.string()
        << '\n';
    return kOk;
  });
}

// ---------------------------------------------------------------------------
// chaos

/// Trajectory of the ensemble with `count` particles: M = count parameters and
/// max(1, count / anchors) attacks per anchor, snapshots every snapshot_every steps.
inline std::vector<Snapshot> chaos_trajectory(const ExperimentConfig& cfg, const Dataset& data, std::size_t count) {
  InitSpec spec = init_spec_for(cfg, data);
  spec.param_particles = count;
  spec.attacks_per_anchor = std::max<std::size_t>(1, count / data.size());
  RunHooks hooks;
  hooks.keep_snapshots = true;
  return run(init_state(data, spec), cfg.payoff, cfg.solver, hooks).snapshots;
}

inline double median(std::vector<double> v) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const std::size_t h = v.size() / 2;
  return v.size() % 2 ? v[h] : 0.5 * (v[h - 1] + v[h]);
}

inline int cmd_chaos(const std::string& config_path, const std::optional<std::vector<std::size_t>>& counts_override,
                     const std::optional<std::size_t>& seeds_override, const Overrides& ov, std::ostream& out,
                     std::ostream& err) {
  return guarded(err, [&] {
    auto cfg = resolve(config_path, ov);
    if (counts_override) cfg.chaos.counts = *counts_override;
    if (seeds_override) cfg.chaos.seeds = *seeds_override;
    auto counts = cfg.chaos.counts;
    if (counts.size() < 2) throw InvalidConfig("need ≥ 2 counts (the largest one is the reference)");
    if (!std::is_sorted(counts.begin(), counts.end()) ||
        std::adjacent_find(counts.begin(), counts.end()) != counts.end())
      throw InvalidConfig("particle counts must be strictly increasing");
    if (counts.front() == 0) throw InvalidConfig("particle counts must be positive");
    if (cfg.chaos.seeds == 0) throw InvalidConfig("need at least one seed");

    std::string joined;
    for (auto c : counts) joined += (joined.empty() ? "" : ",") + std::to_string(c);
    cfg.resolved.set("chaos.counts", joined);
    cfg.resolved.set("chaos.seeds", std::to_string(cfg.chaos.seeds));

    const fs::path dir = cfg.out_dir;
    make_dir(dir);
    write_file(dir / "config.resolved.ini", [&](std::ostream& os) { cfg.resolved.write_ini(os); });

    std::vector<std::vector<double>> sups(counts.size() - 1);
    for (std::size_t s = 0; s < cfg.chaos.seeds; ++s) {
      ExperimentConfig run_cfg = cfg;
      run_cfg.reseed(stream_seed(cfg.seed, "chaos.seed", s));
      run_cfg.data.n = cfg.chaos.anchors;
      const auto data = build_datasets(run_cfg).train;
      const auto reference = chaos_trajectory(run_cfg, data, counts.back());
      for (std::size_t c = 0; c + 1 < counts.size(); ++c) {
        const auto traj = chaos_trajectory(run_cfg, data, counts[c]);
        const auto series = ot::chaos_metric(traj, reference, run_cfg.chaos.options);
        const std::string name = "chaos_N" + std::to_string(counts[c]) + "_seed" + std::to_string(s) + ".csv";
        write_file(dir / name, [&](std::ostream& os) { ot::write_chaos_csv(os, series); });
        sups[c].push_back(series.sup);
      }
    }

    write_file(dir / "summary.csv", [&](std::ostream& os) {
      os << "count,reference,median_sup";
      for (std::size_t s = 0; s < cfg.chaos.seeds; ++s) os << ",sup_seed" << s;
      os << '\n';
      for (std::size_t c = 0; c + 1 < counts.size(); ++c) {
        os << counts[c] << ',' << counts.back() << ',' << csv::format_double(median(sups[c]));
        for (double v : sups[c]) os << ',' << csv::format_double(v);
        os << '\n';
      }
    });
    out << "count  median sup_t W1 (reference " << counts.back() << ")\n";
    for (std::size_t c = 0; c + 1 < counts.size(); ++c)
      out << std::setw(5) << counts[c] << "  " << median(sups[c]) << '\n';
    return kOk;
  });
}

// ---------------------------------------------------------------------------
// attack-eval

inline int cmd_attack_eval(const std::string& config_path, const std::string& model_dir, const Overrides& ov,
                           std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const auto cfg = resolve(config_path, ov);
    const fs::path model = model_dir;
    const bool averaged = cfg.eval.model == EvalModel::averaged;
    const fs::path nu_path = model / (averaged ? "avg_nu.csv" : "final_nu.csv");
    if (!fs::is_regular_file(nu_path))
      throw MissingModel(std::string("no ") + (averaged ? "averaged" : "final") + " model at '" + nu_path.string() + "'");

    const auto data = build_datasets(cfg);
    const Dataset& eval_set = data.test.size() > 0 ? data.test : data.train;
    std::ifstream in(nu_path);
    if (!in) throw IoError("cannot read '" + nu_path.string() + "'");
    const auto nu = read_param_csv(in, init_spec_for(cfg, data.train).theta_box);

    const double clean = accuracy(nu, eval_set, cfg.payoff.activation);
    const double attacked = accuracy(nu, pgd_attack(nu, eval_set, cfg.payoff, cfg.eval.pgd), cfg.payoff.activation);

    const fs::path dir = ov.out_dir ? fs::path(*ov.out_dir) : model;
    make_dir(dir);
    nlohmann::ordered_json j;
    j["model"] = averaged ? "averaged" : "final";
    j["clean_accuracy"] = clean;
    j["pgd_accuracy"] = attacked;
    j["pgd_steps"] = cfg.eval.pgd.steps;
    j["pgd_step_size"] = cfg.eval.pgd.step_size;
    j["pgd_epsilon"] = cfg.eval.pgd.epsilon;
    j["points"] = eval_set.size();
    write_file(dir / "attack.json", [&](std::ostream& os) { os << j.dump(2) << '\n'; });

    // One row per evaluation, appended so repeated attacks on a model accumulate.
    const fs::path metrics = dir / "metrics.csv";
    const bool fresh = !fs::exists(metrics);
    std::ofstream m(metrics, std::ios::app);
    if (!m) throw IoError("cannot write '" + metrics.string() + "'");
    if (fresh) m << "model_dir,model,pgd_steps,pgd_step_size,pgd_epsilon,points,clean_accuracy,pgd_accuracy\n";
    m << model.string() << ',' << (averaged ? "averaged" : "final") << ',' << cfg.eval.pgd.steps << ',' << csv::format_double(cfg.eval.pgd.step_size) << ','
      << csv::format_double(cfg.eval.pgd.epsilon) << ',' << eval_set.size() << ',' << csv::format_double(clean)
      << ',' << csv::format_double(attacked) << '\n';
    if (!m) throw IoError("cannot write '" + metrics.string() + "'");
    out << "clean accuracy " << clean << "  pgd accuracy " << attacked << '\n';
    return kOk;
  });
}

// ---------------------------------------------------------------------------
// gen-data

inline const std::vector<std::string>& data_kinds() {
  static const std::vector<std::string> k{"regression_1d", "two_moons"};
  return k;
}

inline int cmd_gen_data(const std::string& kind, std::size_t n, double noise, std::uint64_t seed,
                        const std::string& out_path, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    Dataset ds;
    if (kind == "regression_1d") {
      ds = gen_regression_1d(n, noise, seed);
    } else if (kind == "two_moons") {
      ds = gen_two_moons(n, noise, seed);
    } else {
      std::string valid;
      for (const auto& k : data_kinds()) valid += (valid.empty() ? "" : ", ") + k;
      throw InvalidConfig("unknown data kind '" + kind + "' (valid kinds: " + valid + ")");
    }
    const fs::path p = out_path;
    if (p.has_parent_path()) make_dir(p.parent_path());
    write_file(p, [&](std::ostream& os) { write_csv(os, ds); });
    out << ds.size() << " points -> " << p.string() << '\n';
    return kOk;
  });
}

}  // namespace wada::cli

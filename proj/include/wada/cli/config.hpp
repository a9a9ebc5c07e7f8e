#pragma once

// Experiment configuration: INI text with one section per module.
//
//   [section]
//   key = value      ; comments start with ';' or '#'
//
// Every key has a default; a file only needs the keys it changes. Unknown sections or
// keys are rejected. After the file is read, WADA_<SECTION>_<KEY> environment variables
// (upper case) override single values. The merged table is what `resolved()` writes.

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cstdint>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <map>
#include <ostream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "wada/averaging.hpp"
#include "wada/data.hpp"
#include "wada/dynamics.hpp"
#include "wada/errors.hpp"
#include "wada/eval.hpp"
#include "wada/ot.hpp"
#include "wada/payoff.hpp"
#include "wada/util.hpp"

namespace wada::cli {

/// Section -> ordered (key, default) pairs.
inline const std::vector<std::pair<std::string, std::vector<std::pair<std::string, std::string>>>>& schema() {
  static const std::vector<std::pair<std::string, std::vector<std::pair<std::string, std::string>>>> s = {
      {"run", {{"seed", "0"}, {"threads", "1"}}},
      {"data",
       {{"kind", "regression_1d"},
        {"n", "32"},
        {"noise", "0.05"},
        {"path", ""},
        {"bias_feature", "false"},
        {"test_fraction", "0"}}},
      {"init",
       {{"nu0", "uniform_box"},
        {"nu0_mean", "0"},
        {"nu0_std", "1"},
        {"pi0", "diagonal"},
        {"pi0_std", "0.1"},
        {"attacks_per_anchor", "8"},
        {"param_particles", "64"},
        {"param_box", "4"}}},
      {"payoff", {{"activation", "sigmoid"}, {"loss", "squared"}, {"c_a", "10"}, {"attack_target", "full_z"}}},
      {"solver",
       {{"schedule", "inverse_t"},
        {"eta0", "0.1"},
        {"kappa", "0.25"},
        {"inner_repeats", "1"},
        {"strongly_concave", "false"},
        {"ascent_dt", "0.05"},
        {"freeze_adversary", "false"},
        {"max_steps", "1000"},
        {"checkpoint_every", "10"},
        {"snapshot_every", "100"}}},
      {"averaging", {{"kind", "full_mixture"}, {"capacity", "0"}}},
      {"eval",
       {{"nash_gap", "true"},
        {"adversary_restarts", "8"},
        {"adversary_iterations", "200"},
        {"learner_epochs", "5"},
        {"learner_iterations", "20"},
        {"pgd_steps", "20"},
        {"pgd_step_size", "0.04"},
        {"pgd_epsilon", "0.3"},
        {"model", "averaged"}}},
      {"chaos",
       {{"counts", "8,32,128,512"},
        {"seeds", "5"},
        {"anchors", "8"},
        {"mode", "exact"},
        {"n_projections", "64"}}},
      {"output", {{"dir", "runs/default"}, {"snapshots", "true"}}},
  };
  return s;
}

/// Flat, ordered string table keyed by "section.key".
class KeyValues {
public:
  KeyValues() {
    for (const auto& [section, keys] : schema())
      for (const auto& [key, value] : keys) values_[section + "." + key] = value;
  }

  const std::string& get(const std::string& dotted) const {
    auto it = values_.find(dotted);
    if (it == values_.end()) throw InvalidConfig("unknown key '" + dotted + "'");
    return it->second;
  }

  void set(const std::string& dotted, std::string value) {
    auto it = values_.find(dotted);
    if (it == values_.end()) throw InvalidConfig("unknown key '" + dotted + "'");
    it->second = std::move(value);
  }

  void write_ini(std::ostream& os) const {
    bool first = true;
    for (const auto& [section, keys] : schema()) {
      if (!first) os << '\n';
      first = false;
      os << '[' << section << "]\n";
      for (const auto& [key, def] : keys) os << key << " = " << values_.at(section + "." + key) << '\n';
    }
  }

private:
  std::map<std::string, std::string> values_;
};

namespace detail {

inline std::string trim(std::string s) {
  auto sp = [](unsigned char c) { return std::isspace(c) != 0; };
  s.erase(s.begin(), std::find_if_not(s.begin(), s.end(), sp));
  s.erase(std::find_if_not(s.rbegin(), s.rend(), sp).base(), s.end());
  return s;
}

inline std::string env_name(const std::string& section, const std::string& key) {
  std::string n = "WADA_" + section + "_" + key;
  for (auto& c : n) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  return n;
}

inline double to_double(const std::string& k, const std::string& v) {
  double x = 0.0;
  const auto* end = v.data() + v.size();
  auto [p, ec] = std::from_chars(v.data(), end, x);
  if (ec != std::errc() || p != end) throw InvalidConfig(k + ": expected a number, got '" + v + "'");
  return x;
}

inline std::uint64_t to_uint(const std::string& k, const std::string& v) {
  std::uint64_t x = 0;
  const auto* end = v.data() + v.size();
  auto [p, ec] = std::from_chars(v.data(), end, x);
  if (ec != std::errc() || p != end) throw InvalidConfig(k + ": expected a non-negative integer, got '" + v + "'");
  return x;
}

inline bool to_bool(const std::string& k, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw InvalidConfig(k + ": expected true or false, got '" + v + "'");
}

template <typename E>
E to_enum(const std::string& k, const std::string& v, const std::vector<std::pair<std::string, E>>& names) {
  std::string valid;
  for (const auto& [n, e] : names) {
    if (n == v) return e;
    valid += (valid.empty() ? "" : ", ") + n;
  }
  throw InvalidConfig(k + ": unknown value '" + v + "' (valid: " + valid + ")");
}

inline std::vector<std::size_t> to_uint_list(const std::string& k, const std::string& v) {
  std::vector<std::size_t> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(static_cast<std::size_t>(to_uint(k, trim(item))));
  return out;
}

}  // namespace detail

/// Reads an INI stream over the defaults, then applies environment overrides.
inline KeyValues parse_config(std::istream& is, const std::function<const char*(const char*)>& getenv = std::getenv) {
  boost::property_tree::ptree pt;
  try {
    boost::property_tree::ini_parser::read_ini(is, pt);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw InvalidConfig("line " + std::to_string(e.line()) + ": " + e.message());
  }
  KeyValues kv;
  for (const auto& [section, node] : pt) {
    if (node.empty() && !node.data().empty()) throw InvalidConfig("key '" + section + "' must sit inside a section");
    for (const auto& [key, leaf] : node) {
      if (!leaf.empty()) throw InvalidConfig("nested key '" + section + "." + key + "'");
      kv.set(section + "." + key, detail::trim(leaf.data()));
    }
  }
  for (const auto& [section, keys] : schema())
    for (const auto& [key, def] : keys)
      if (const char* v = getenv(detail::env_name(section, key).c_str())) kv.set(section + "." + key, v);
  return kv;
}

inline KeyValues load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidConfig("cannot read config file '" + path + "'");
  return parse_config(in);
}

struct DataSpec {
  std::string kind = "regression_1d";  // regression_1d, two_moons, csv
  std::size_t n = 32;
  double noise = 0.05;
  std::string path;
  bool bias_feature = false;
  double test_fraction = 0.0;
};

enum class EvalModel { averaged, final };

struct EvalSpec {
  bool nash_gap = true;
  EvalModel model = EvalModel::averaged;  // which trained measure attack-eval loads
  NashOptions nash;
  PgdConfig pgd;
};

struct ChaosSpec {
  std::vector<std::size_t> counts{8, 32, 128, 512};
  std::size_t seeds = 5;
  std::size_t anchors = 8;
  ot::ChaosOptions options;
};

struct ExperimentConfig {
  std::uint64_t seed = 0;
  unsigned threads = 1;
  DataSpec data;
  InitSpec init;
  double param_box = 4.0;
  PayoffModel payoff;
  SolverConfig solver;
  AveragerSpec averaging;
  EvalSpec eval;
  ChaosSpec chaos;
  std::string out_dir = "runs/default";
  bool snapshots = true;
  KeyValues resolved;

  /// Re-derives every per-module seed from the master seed.
  void reseed(std::uint64_t master) {
    seed = master;
    init.seed = stream_seed(seed, "init");
    solver.seed = stream_seed(seed, "solver");
    averaging.seed = stream_seed(seed, "averaging");
    eval.nash.adversary.seed = stream_seed(seed, "eval");
    chaos.options.seed = stream_seed(seed, "chaos");
    resolved.set("run.seed", std::to_string(seed));
  }

  void set_threads(unsigned t) {
    threads = std::max(1u, t);
    solver.threads = eval.nash.adversary.threads = eval.nash.learner.threads = chaos.options.threads = threads;
    resolved.set("run.threads", std::to_string(threads));
  }

  std::uint64_t data_seed() const { return stream_seed(seed, "data"); }
};

inline ExperimentConfig to_experiment(const KeyValues& kv) {
  using namespace detail;
  auto s = [&](const std::string& k) { return kv.get(k); };
  auto d = [&](const std::string& k) { return to_double(k, kv.get(k)); };
  auto u = [&](const std::string& k) { return static_cast<std::size_t>(to_uint(k, kv.get(k))); };
  auto b = [&](const std::string& k) { return to_bool(k, kv.get(k)); };

  ExperimentConfig c;
  c.resolved = kv;

  c.data.kind = to_enum<std::string>("data.kind", s("data.kind"),
                                     {{"regression_1d", "regression_1d"}, {"two_moons", "two_moons"}, {"csv", "csv"}});
  c.data.n = u("data.n");
  c.data.noise = d("data.noise");
  c.data.path = s("data.path");
  c.data.bias_feature = b("data.bias_feature");
  c.data.test_fraction = d("data.test_fraction");
  if (!(c.data.test_fraction >= 0.0 && c.data.test_fraction < 1.0))
    throw InvalidConfig("data.test_fraction must lie in [0, 1)");
  if (c.data.kind == "csv" && c.data.path.empty()) throw InvalidConfig("data.path is required when data.kind = csv");

  c.init.nu0 = to_enum<ParamInitKind>("init.nu0", s("init.nu0"),
                                      {{"uniform_box", ParamInitKind::uniform_box},
                                       {"gaussian_clipped", ParamInitKind::gaussian_clipped}});
  c.init.nu0_mean = d("init.nu0_mean");
  c.init.nu0_std = d("init.nu0_std");
  c.init.pi0 = to_enum<AttackInitKind>("init.pi0", s("init.pi0"),
                                       {{"diagonal", AttackInitKind::diagonal},
                                        {"conditional_noise", AttackInitKind::conditional_noise}});
  c.init.pi0_std = d("init.pi0_std");
  c.init.attacks_per_anchor = u("init.attacks_per_anchor");
  c.init.param_particles = u("init.param_particles");
  c.param_box = d("init.param_box");
  if (!(c.param_box > 0.0)) throw InvalidConfig("init.param_box must be positive");
  c.init.validate();

  c.payoff.activation.kind = to_enum<ActivationKind>("payoff.activation", s("payoff.activation"),
                                                     {{"sigmoid", ActivationKind::sigmoid},
                                                      {"relu", ActivationKind::relu},
                                                      {"squared_relu", ActivationKind::squared_relu}});
  c.payoff.loss.kind = to_enum<LossKind>("payoff.loss", s("payoff.loss"),
                                         {{"squared", LossKind::squared}, {"logistic", LossKind::logistic}});
  c.payoff.c_a = d("payoff.c_a");
  c.payoff.attack_target = to_enum<AttackTarget>("payoff.attack_target", s("payoff.attack_target"),
                                                 {{"full_z", AttackTarget::full_z}, {"x_only", AttackTarget::x_only}});
  c.payoff.validate();

  c.solver.schedule.kind = to_enum<ScheduleKind>("solver.schedule", s("solver.schedule"),
                                                 {{"inverse_t", ScheduleKind::inverse_t},
                                                  {"constant", ScheduleKind::constant}});
  c.solver.schedule.eta0 = d("solver.eta0");
  c.solver.kappa = d("solver.kappa");
  c.solver.inner_repeats = u("solver.inner_repeats");
  c.solver.ascent_uses_eta = !b("solver.strongly_concave");
  c.solver.ascent_dt = d("solver.ascent_dt");
  c.solver.freeze_adversary = b("solver.freeze_adversary");
  c.solver.max_steps = u("solver.max_steps");
  c.solver.checkpoint_every = u("solver.checkpoint_every");
  c.solver.snapshot_every = u("solver.snapshot_every");
  c.solver.validate();

  c.averaging.kind = to_enum<AveragerKind>("averaging.kind", s("averaging.kind"),
                                           {{"full_mixture", AveragerKind::full_mixture},
                                            {"weights_only", AveragerKind::weights_only},
                                            {"rsr_capped", AveragerKind::rsr_capped}});
  c.averaging.capacity = u("averaging.capacity");
  if (c.averaging.kind == AveragerKind::rsr_capped && c.averaging.capacity == 0)
    throw InvalidConfig("averaging.capacity must be positive for rsr_capped");

  c.eval.nash_gap = b("eval.nash_gap");
  c.eval.nash.adversary.restarts = u("eval.adversary_restarts");
  c.eval.nash.adversary.iterations = u("eval.adversary_iterations");
  c.eval.nash.learner.epochs = u("eval.learner_epochs");
  c.eval.nash.learner.iterations_per_epoch = u("eval.learner_iterations");
  c.eval.nash.learner.kappa = c.solver.kappa;
  c.eval.pgd.steps = u("eval.pgd_steps");
  c.eval.pgd.step_size = d("eval.pgd_step_size");
  c.eval.pgd.epsilon = d("eval.pgd_epsilon");
  c.eval.pgd.validate();
  c.eval.model = to_enum<EvalModel>("eval.model", s("eval.model"),
                                    {{"averaged", EvalModel::averaged}, {"final", EvalModel::final}});

  c.chaos.counts = to_uint_list("chaos.counts", s("chaos.counts"));
  c.chaos.seeds = u("chaos.seeds");
  c.chaos.anchors = u("chaos.anchors");
  c.chaos.options.mode = to_enum<ot::ChaosMode>("chaos.mode", s("chaos.mode"),
                                                {{"exact", ot::ChaosMode::exact}, {"sliced", ot::ChaosMode::sliced}});
  c.chaos.options.n_projections = u("chaos.n_projections");
  if (c.chaos.anchors < 1) throw InvalidConfig("chaos.anchors must be at least 1");

  c.out_dir = s("output.dir");
  c.snapshots = b("output.snapshots");

  c.reseed(to_uint("run.seed", s("run.seed")));
  c.set_threads(static_cast<unsigned>(u("run.threads")));
  return c;
}

}  // namespace wada::cli

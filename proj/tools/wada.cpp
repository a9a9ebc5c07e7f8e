#include <CLI11.hpp>

#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "wada/cli/commands.hpp"

namespace {

struct Common {
  std::string config;
  std::string out;
  unsigned threads = 0;
  std::uint64_t seed = 0;
};

void add_common(CLI::App* app, Common& c, bool require_config = true) {
  auto* opt = app->add_option("--config", c.config, "experiment configuration file");
  if (require_config) opt->required();
  app->add_option("--out", c.out, "output directory (overrides output.dir)");
  app->add_option("--threads", c.threads, "worker threads (overrides run.threads)")->check(CLI::PositiveNumber);
  app->add_option("--seed-override", c.seed, "master seed (overrides run.seed)");
}

wada::cli::Overrides overrides(const CLI::App* app, const Common& c) {
  wada::cli::Overrides ov;
  if (app->count("--out")) ov.out_dir = c.out;
  if (app->count("--threads")) ov.threads = c.threads;
  if (app->count("--seed-override")) ov.seed = c.seed;
  return ov;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Wasserstein ascent-descent for adversarially trained shallow networks"};
  app.require_subcommand(1);

  Common train_opts, chaos_opts, eval_opts;
  auto* train = app.add_subcommand("train", "run the solver, average the trajectory and report the Nash gap");
  add_common(train, train_opts);

  auto* chaos = app.add_subcommand("chaos", "compare ensembles of growing size against the largest one");
  add_common(chaos, chaos_opts);
  std::vector<std::size_t> counts;
  std::size_t seeds = 0;
  chaos->add_option("--counts", counts, "particle counts, ascending; the last is the reference")->delimiter(',');
  chaos->add_option("--seeds", seeds, "number of seeds");

  auto* attack = app.add_subcommand("attack-eval", "clean and PGD accuracy of a trained network");
  add_common(attack, eval_opts);
  std::string model_dir;
  attack->add_option("--model", model_dir, "training output directory (avg_nu.csv or final_nu.csv, per eval.model)")->required();

  auto* gen = app.add_subcommand("gen-data", "write a synthetic dataset as CSV");
  std::string kind, gen_out;
  std::size_t n = 0;
  double noise = 0.0;
  std::uint64_t gen_seed = 0;
  gen->add_option("--kind", kind, "regression_1d or two_moons")->required();
  gen->add_option("--n", n, "number of points")->required();
  gen->add_option("--noise", noise, "noise standard deviation");
  gen->add_option("--seed", gen_seed, "seed");
  gen->add_option("--out", gen_out, "output CSV path")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : wada::cli::kConfigError;
  }

  if (*train) return wada::cli::cmd_train(train_opts.config, overrides(train, train_opts), std::cout, std::cerr);
  if (*chaos) {
    std::optional<std::vector<std::size_t>> c;
    std::optional<std::size_t> s;
    if (chaos->count("--counts")) c = counts;
    if (chaos->count("--seeds")) s = seeds;
    return wada::cli::cmd_chaos(chaos_opts.config, c, s, overrides(chaos, chaos_opts), std::cout, std::cerr);
  }
  if (*attack)
    return wada::cli::cmd_attack_eval(eval_opts.config, model_dir, overrides(attack, eval_opts), std::cout,
                                      std::cerr);
  return wada::cli::cmd_gen_data(kind, n, noise, gen_seed, gen_out, std::cout, std::cerr);
}

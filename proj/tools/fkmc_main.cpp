#include <CLI11.hpp>

#include <iostream>
#include <optional>
#include <string>

#include "fkmc/runner.hpp"

namespace {

struct CliArgs {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::int64_t> paths;
  std::optional<int> workers;
  std::optional<std::string> output;
};

void add_common(CLI::App* sub, CliArgs& args) {
  sub->add_option("config", args.config_path, "JSON config file")->required();
  sub->add_option("--seed", args.seed, "override the RNG master seed");
  sub->add_option("--paths", args.paths, "override the path count");
  sub->add_option("--workers", args.workers, "override the worker count");
  sub->add_option("--output", args.output,
                  "override the output destination ('-' = stdout)");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "fkmc: Monte Carlo estimators for Feynman-Kac semigroups and their "
      "derivatives on model manifolds"};
  app.require_subcommand(1);

  CliArgs args;
  CLI::App* run_cmd =
      app.add_subcommand("run", "run the configured estimators once");
  add_common(run_cmd, args);
  CLI::App* sweep_cmd = app.add_subcommand(
      "sweep", "run the estimators across the config's t_grid (CSV output)");
  add_common(sweep_cmd, args);

  CLI11_PARSE(app, argc, argv);
  const bool is_sweep = sweep_cmd->parsed();

  try {
    fkmc::RunConfig cfg =
        fkmc::parse_config_file(args.config_path, is_sweep);
    fkmc::Overrides ov;
    ov.seed = args.seed;
    ov.paths = args.paths;
    ov.workers = args.workers;
    ov.output = args.output;
    fkmc::apply_overrides(cfg, ov);
    const fkmc::RunOutcome out = is_sweep ? fkmc::sweep(cfg) : fkmc::run(cfg);
    if (!out.message.empty()) std::cerr << "fkmc: " << out.message << "\n";
    return out.exit_code;
  } catch (const fkmc::ConfigError& e) {
    std::cerr << "fkmc: " << e.what() << "\n";
    return fkmc::kExitConfigInvalid;
  } catch (const std::exception& e) {
    std::cerr << "fkmc: " << e.what() << "\n";
    return fkmc::kExitConfigInvalid;
  }
}

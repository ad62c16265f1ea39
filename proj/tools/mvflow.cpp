#include <cstdint>
#include <string>

#include "CLI11.hpp"
#include "mvflow/cli.hpp"

int main(int argc, char** argv) {
  using namespace mvflow;
  cli::configure_logging();

  CLI::App app{"Mixed-volume preserving curvature flows of convex hypersurfaces"};
  app.require_subcommand(1);

  std::string config, out = "out", sweep_config, trajectory;
  std::uint64_t seed = 0;
  int n = 2, samples = 100000, workers = 1;

  auto* run = app.add_subcommand("run", "Evolve one configuration");
  run->add_option("--config", config, "JSON configuration")->required()->check(CLI::ExistingFile);
  run->add_option("--out", out, "Output directory");
  auto* run_seed = run->add_option("--seed", seed, "Override the configuration seed");

  auto* verify = app.add_subcommand("verify", "Certify the registry and sample the inequalities");
  verify->add_option("--n", n, "Dimension")->check(CLI::Range(2, 32));
  verify->add_option("--samples", samples, "Cone samples")->check(CLI::PositiveNumber);
  verify->add_option("--seed", seed, "Sampler seed");
  verify->add_option("--out", out, "Output directory");

  auto* sweep = app.add_subcommand("sweep", "Run the cartesian product of a sweep file");
  sweep->add_option("--config", sweep_config, "Sweep JSON")->required()->check(CLI::ExistingFile);
  sweep->add_option("--out", out, "Output directory");
  sweep->add_option("--workers", workers, "Parallel runs")->check(CLI::PositiveNumber);

  auto* plot = app.add_subcommand("plot", "Render SVG charts from a trajectory CSV");
  plot->add_option("trajectory", trajectory, "trajectory.csv")->required();
  plot->add_option("--out", out, "Output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : cli::kError;
  }

  if (*run) {
    return cli::cmd_run(config, out, run_seed->count() ? std::optional(seed) : std::nullopt);
  }
  if (*verify) return cli::cmd_verify(n, samples, seed, out);
  if (*sweep) return cli::cmd_sweep(sweep_config, out, workers);
  return cli::cmd_plot(trajectory, out);
}

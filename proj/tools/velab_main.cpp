// Command-line surface: one experiment per process, driven by a JSON config
// (or pure defaults via --experiment), with flag overrides for the output
// directory and seed. Exit codes: 0 = run finished and its acceptance checks
// passed, 1 = run finished but a check failed, 2 = configuration problem,
// 3 = solver or I/O failure.

#include <cstdio>
#include <stdexcept>
#include <string>

#include "CLI11.hpp"

#include "velab/config.hpp"

int main(int argc, char** argv) {
  CLI::App app{"velab: constrained minimization experiments in finite elasticity"};
  app.footer("Run 'velab list' for the available experiments.");

  std::string config_path;
  std::string experiment;
  std::string out_dir;
  long long seed = -1;
  int threads = 1;
  app.add_option("--config", config_path, "JSON experiment configuration file");
  app.add_option("--experiment", experiment, "experiment name (overrides the config)");
  app.add_option("--out", out_dir, "output directory (overrides the config)");
  app.add_option("--seed", seed, "RNG seed (overrides the config)")
      ->check(CLI::NonNegativeNumber);
  app.add_option("--threads", threads, "worker threads (results are sequential; clamped to 1)");
  CLI::App* list_cmd = app.add_subcommand("list", "list the available experiments");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  if (*list_cmd) {
    for (const velab::ExperimentInfo& info : velab::list_experiments()) {
      std::printf("%-12s %s\n", info.name.c_str(), info.summary.c_str());
    }
    return 0;
  }

  if (config_path.empty() && experiment.empty()) {
    std::fprintf(stderr, "velab: need --config FILE or --experiment NAME\n");
    return 2;
  }
  if (threads != 1) {
    std::fprintf(stderr, "velab: --threads clamped to 1 (runs are sequential for "
                         "reproducible output)\n");
  }

  try {
    velab::ExperimentConfig cfg;
    if (!config_path.empty()) cfg = velab::load_config_file(config_path);
    if (!experiment.empty()) cfg.experiment = experiment;
    if (!out_dir.empty()) cfg.output.directory = out_dir;
    if (seed >= 0) cfg.solver.seed = static_cast<unsigned long long>(seed);

    const velab::RunReport rep = velab::run(cfg);
    std::printf("experiment %s (run %s)\n", rep.experiment.c_str(), rep.run_id.c_str());
    for (const std::string& p : rep.csv_paths) std::printf("  csv  %s\n", p.c_str());
    for (const std::string& p : rep.json_paths) std::printf("  json %s\n", p.c_str());
    std::printf("  summary %s\n", rep.summary_path.c_str());
    std::printf("  log     %s\n", rep.log_path.c_str());
    std::printf("checks %s (%.2f s)\n", rep.checks_pass ? "PASS" : "FAIL", rep.wall_seconds);
    return rep.checks_pass ? 0 : 1;
  } catch (const std::invalid_argument& e) {
    std::fprintf(stderr, "velab: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "velab: %s\n", e.what());
    return 3;
  }
}

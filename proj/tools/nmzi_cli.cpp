#include "nmzi/experiment.hpp"

#include <CLI11.hpp>

#include <cstdlib>
#include <iostream>

// Experiment runner and circuit-file utilities.  `run` executes one preset or
// config-file experiment per invocation; `validate` checks circuit files and
// optionally re-evaluates them against a recorded observable row.

namespace {

std::string default_out_dir(const std::string& preset) {
  if (const char* env = std::getenv("NMZI_OUT_DIR")) return std::string(env) + "/" + preset;
  return "nmzi_out/" + preset;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"nonlinear interferometer cascade simulator and optimizer"};
  app.require_subcommand(1);

  // run ----------------------------------------------------------------
  auto* run_cmd = app.add_subcommand("run", "run an experiment preset or config file");
  std::string config_path, out_dir, preset;
  long long budget = -1;
  long long seed = -1;
  int threads = 0, starts = 0;
  run_cmd->add_option("--config", config_path, "experiment config file");
  run_cmd->add_option("--preset", preset, "preset name (see --list-presets)");
  run_cmd->add_option("--out", out_dir, "output directory");
  run_cmd->add_option("--seed", seed, "seed override");
  run_cmd->add_option("--budget", budget, "total objective-evaluation budget override");
  run_cmd->add_option("--threads", threads, "concurrent optimizer restarts");
  run_cmd->add_option("--starts", starts, "multi-start count override");
  bool list_presets = false;
  run_cmd->add_flag("--list-presets", list_presets, "print preset names and exit");

  // validate -----------------------------------------------------------
  auto* val_cmd = app.add_subcommand("validate", "check a circuit file");
  std::string spec_path, report_path, target_csv;
  double tol = 1e-9;
  val_cmd->add_option("spec", spec_path, "circuit file")->required();
  val_cmd->add_option("--report", report_path, "recorded observable row to re-evaluate against");
  val_cmd->add_option("--target", target_csv, "target amplitudes for the fidelity column, e.g. 1,1");
  val_cmd->add_option("--tol", tol, "re-evaluation tolerance");

  CLI11_PARSE(app, argc, argv);

  try {
    if (run_cmd->parsed()) {
      if (list_presets) {
        for (const auto& n : nmzi::preset_names()) std::cout << n << "\n";
        return 0;
      }
      if (config_path.empty() && preset.empty()) {
        std::cerr << "error: need --preset or --config\n";
        return 1;
      }
      nmzi::ExperimentConfig cfg =
          config_path.empty() ? nmzi::preset_config(preset) : nmzi::parse_config_file(config_path);
      if (!preset.empty() && !config_path.empty() && preset != cfg.preset) {
        std::cerr << "error: --preset disagrees with the config file\n";
        return 1;
      }
      if (!out_dir.empty()) cfg.out_dir = out_dir;
      if (cfg.out_dir.empty()) cfg.out_dir = default_out_dir(cfg.preset);
      if (seed >= 0) cfg.seed = static_cast<unsigned long long>(seed);
      if (budget >= 0) cfg.budget = budget;
      if (threads > 0) cfg.threads = threads;
      if (starts > 0) cfg.n_starts = starts;

      const nmzi::ExperimentOutcome outcome = nmzi::run_experiment(cfg);
      for (const auto& f : outcome.outputs) std::cout << "wrote " << f << "\n";
      if (!outcome.message.empty()) std::cerr << outcome.message << "\n";
      return outcome.exit_code;
    }

    // validate
    const nmzi::ValidationReport rep = nmzi::validate_spec(spec_path);
    for (const auto& e : rep.errors) std::cerr << "error: " << e << "\n";
    for (const auto& w : rep.warnings) std::cout << "warning: " << w << "\n";
    if (!rep.ok) return 1;
    std::cout << spec_path << ": " << rep.circuit.spec.size() << " elements, n_max "
              << rep.circuit.n_max << ", round-trip "
              << (rep.roundtrip_identical ? "identical" : "differs") << "\n";

    if (!report_path.empty()) {
      std::ifstream rin(report_path);
      if (!rin) {
        std::cerr << "error: cannot read '" << report_path << "'\n";
        return 1;
      }
      std::stringstream buf;
      buf << rin.rdbuf();
      Eigen::VectorXcd target;
      const Eigen::VectorXcd* target_p = nullptr;
      if (!target_csv.empty()) {
        const auto amps = nmzi::detail::parse_grid(target_csv);
        target.resize(amps.size());
        for (std::size_t i = 0; i < amps.size(); ++i) target(i) = amps[i];
        target /= target.norm();
        target_p = &target;
      }
      const auto errors = nmzi::check_recorded_report(rep.circuit, buf.str(), tol, target_p);
      for (const auto& e : errors) std::cerr << "error: " << e << "\n";
      if (!errors.empty()) return 1;
      std::cout << "recorded report reproduced within " << tol << "\n";
    }
    return 0;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}

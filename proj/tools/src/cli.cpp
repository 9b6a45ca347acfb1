#include "cli.hpp"

#include <CLI11.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <map>

#include "brc/error.hpp"
#include "commands.hpp"

namespace brc::cli {

namespace {

struct Command {
  const char* name;
  const char* help;
  void (*action)(const RunConfig&);
};

const Command kCommands[] = {
    {"simulate", "Generate a synthetic panel (records.csv, truth_lambda.csv, truth.manifest)", run_simulate},
    {"fit", "Fit one model to a survey file", run_fit},
    {"select", "Two-stage horseshoe selection per wave", run_select},
    {"debias-sequence", "Sequential wave fits and post-stratified population estimates", run_debias_sequence},
    {"study", "Incremental inclusion study on one wave", run_study},
    {"evaluate", "LOO, posterior predictive checks and truth comparison for a fit", run_evaluate},
};

void add_flags(CLI::App& sub, Flags& f) {
  sub.add_option("--config", f.config, "Run configuration file (key = value)");
  sub.add_option("--scenario", f.scenario, "Simulator preset");
  sub.add_option("--seed", f.seed, "Random seed");
  sub.add_option("--out", f.out, "Output directory");
  sub.add_option("--data", f.data, "Survey CSV");
  sub.add_option("--model", f.model, "Model preset name or model spec file");
  sub.add_option("--truth", f.truth, "Simulator truth.manifest");
  sub.add_option("--fit", f.fit, "Directory written by `fit`");
  sub.add_option("--threads", f.threads, "Worker threads (0: BRC_THREADS or all cores)");
  sub.add_flag("--strict", f.strict, "Exit 4 when any R-hat >= 1.05");
}

}  // namespace

int run(int argc, char** argv) {
  auto logger = spdlog::stderr_color_mt("brc");
  spdlog::set_default_logger(logger);
  spdlog::set_pattern("[%H:%M:%S] [%l] %v");

  CLI::App app{"Contact-intensity estimation with reporting-fatigue correction"};
  app.require_subcommand(1);
  std::map<std::string, Flags> flags;
  for (const auto& c : kCommands) add_flags(*app.add_subcommand(c.name, c.help), flags[c.name]);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    for (const auto& c : kCommands) {
      if (!app.got_subcommand(c.name)) continue;
      const auto rc = RunConfig::resolve(c.name, flags[c.name]);
      c.action(rc);
    }
    return 0;
  } catch (const ConfigError& e) {
    spdlog::error("configuration error: {}", e.what());
    return 2;
  } catch (const DataError& e) {
    spdlog::error("data error: {}", e.what());
    return 3;
  } catch (const NonFiniteError& e) {
    spdlog::error("data error: {}", e.what());
    return 3;
  } catch (const ConvergenceError& e) {
    spdlog::error("convergence failure: {}", e.what());
    return 4;
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return 1;
  }
}

}  // namespace brc::cli

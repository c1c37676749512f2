#include "gvmt/cli/run_config.h"

#include <cstdlib>
#include <fstream>

#include "gvmt/errors.h"

namespace gvmt::cli {

void add_config_flags(CLI::App& app, ConfigFlags& flags, bool with_switches) {
  app.add_option("--p", flags.p, "Retrieved segments per query");
  app.add_option("--w", flags.w, "Neighbour fusion window");
  app.add_option("--gamma", flags.gamma, "Neighbour fusion weight");
  app.add_option("--k", flags.k, "Segments kept by the selector");
  app.add_option("--lambda", flags.lambda, "Weight of absorbed unselected segments");
  app.add_option("--seed", flags.seed, "Random seed");
  app.add_option("--config", flags.config_file, "Flat JSON file with RunConfig fields");
  app.add_flag("--paper-config", flags.paper, "Start from the full-size hyperparameters");
  if (with_switches) {
    app.add_flag("--no-gr", flags.no_gr, "Local segment only, no global retrieval");
    app.add_flag("--no-tvss", flags.no_tvss, "Keep every retrieved segment, no selection");
    app.add_flag("--no-both", flags.no_both, "Both --no-gr and --no-tvss");
  }
}

model::RunConfig resolve_config(const ConfigFlags& flags, bool apply_switches) {
  model::RunConfig cfg = flags.paper ? model::RunConfig::paper() : model::RunConfig::desk();
  if (!flags.config_file.empty()) {
    std::ifstream in(flags.config_file);
    if (!in) throw ConfigError("cannot open config file " + flags.config_file);
    nlohmann::json j;
    try {
      in >> j;
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError("config file " + flags.config_file + " is not valid JSON: " + e.what());
    }
    cfg = model::RunConfig::from_json(j, cfg);
  }
  if (flags.p) cfg.p = *flags.p;
  if (flags.w) cfg.w = *flags.w;
  if (flags.gamma) cfg.gamma = *flags.gamma;
  if (flags.k) cfg.k = *flags.k;
  if (flags.lambda) cfg.lambda = *flags.lambda;
  if (flags.seed) cfg.seed = *flags.seed;
  if (apply_switches) {
    if (flags.no_gr || flags.no_both) cfg.no_gr = true;
    if (flags.no_tvss || flags.no_both) cfg.no_tvss = true;
  }
  cfg.validate();
  return cfg;
}

std::size_t thread_budget() {
  const char* env = std::getenv("GVMT_THREADS");
  if (!env || !*env) return 1;
  char* end = nullptr;
  const long v = std::strtol(env, &end, 10);
  if (*end != '\0' || v < 1 || v > 1024) throw ConfigError(std::string("GVMT_THREADS must be a positive integer, got \"") + env + "\"");
  return static_cast<std::size_t>(v);
}

}  // namespace gvmt::cli

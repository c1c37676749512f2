#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "gvmt/model/config.h"

namespace gvmt::cli {

// Flags shared by the commands that build a RunConfig. Precedence: desk
// defaults (or --paper-config), then --config, then individual flags.
struct ConfigFlags {
  std::optional<std::size_t> p, w, k;
  std::optional<double> gamma, lambda;
  std::optional<std::uint64_t> seed;
  std::string config_file;
  bool paper = false;
  bool no_gr = false;
  bool no_tvss = false;
  bool no_both = false;
};

// with_switches: also register --no-gr / --no-tvss / --no-both.
void add_config_flags(CLI::App& app, ConfigFlags& flags, bool with_switches);

// Ablation switches are applied only when apply_switches is set.
model::RunConfig resolve_config(const ConfigFlags& flags, bool apply_switches = true);

// GVMT_THREADS, default 1.
std::size_t thread_budget();

}  // namespace gvmt::cli

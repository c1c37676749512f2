#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "gvmt/dataio/dataset.h"
#include "gvmt/eval/bleu.h"
#include "gvmt/model/config.h"

namespace gvmt::cli {

struct Setting {
  std::string name;
  model::RunConfig config;
};

// "full" first, then the requested switches.
std::vector<Setting> ablation_settings(const model::RunConfig& base, bool no_gr, bool no_tvss, bool no_both);

// Cartesian grid over the given axes ("p", "w", "k"), one setting per point,
// axes varying slowest-first in the order given.
std::vector<Setting> sweep_settings(const model::RunConfig& base,
                                    const std::vector<std::pair<std::string, std::vector<std::size_t>>>& axes);

// "p=5,10,20" -> ("p", {5, 10, 20}).
std::pair<std::string, std::vector<std::size_t>> parse_sweep_axis(const std::string& spec);

struct SeedResult {
  std::uint64_t seed = 0;
  std::size_t steps = 0;
  double bleu = 0.0;
  std::optional<double> accuracy;  // when the split has labels
};

struct SettingResult {
  Setting setting;
  std::vector<SeedResult> seeds;
  double mean_bleu() const;
  std::optional<double> mean_accuracy() const;
};

// Train on train (early stopping on valid when present), decode `split`,
// score BLEU and, when labels cover the split, disambiguation accuracy.
SeedResult run_one(const data::Dataset& ds, model::RunConfig cfg, const std::string& split);

// Every setting under every seed. `threads` caps concurrent trainings;
// results do not depend on it.
std::vector<SettingResult> run_settings(const data::Dataset& ds, std::span<const Setting> settings,
                                        std::span<const std::uint64_t> seeds, const std::string& split,
                                        std::size_t threads = 1);

// setting,p,w,k,no_gr,no_tvss,seeds,bleu,accuracy
void write_results_csv(std::ostream& os, std::span<const SettingResult> results);

}  // namespace gvmt::cli

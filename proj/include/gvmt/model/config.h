#pragma once

#include <cstdint>

#include <json.hpp>

namespace gvmt::model {

// Every hyperparameter of a run. Serialized flat into checkpoints and
// accepted as a flat JSON config file with the same keys.
struct RunConfig {
  // retrieval
  std::size_t p = 10;
  std::size_t w = 2;
  double gamma = 0.1;
  // selector
  std::size_t k = 5;
  double lambda = 0.1;
  bool soft_weighting = true;
  // architecture
  std::size_t layers = 2;
  std::size_t d_h = 32;
  std::size_t ffn = 64;
  std::size_t heads = 4;
  double dropout = 0.1;
  std::size_t max_src_len = 64;
  std::size_t max_tgt_len = 64;
  // training
  double label_smoothing = 0.1;
  double peak_lr = 0.003;
  std::size_t warmup = 200;
  std::size_t batch_tokens = 512;
  std::size_t max_steps = 2000;
  std::size_t max_epochs = 1000;
  std::size_t patience = 10;
  bool rectified = true;
  std::uint64_t seed = 1;
  // ablation switches
  bool no_gr = false;
  bool no_tvss = false;
  bool text_only = false;

  static RunConfig desk() { return {}; }
  static RunConfig paper();

  void validate() const;
  nlohmann::ordered_json to_json() const;
  // Keys present in `j` override `base`; unknown keys are rejected.
  static RunConfig from_json(const nlohmann::json& j, RunConfig base);
  static RunConfig from_json(const nlohmann::json& j) { return from_json(j, RunConfig{}); }
  bool operator==(const RunConfig&) const = default;
};

}  // namespace gvmt::model

#pragma once

#include <array>
#include <string>
#include <vector>

#include <json.hpp>

namespace gvmt::eval {

using Tokens = std::vector<std::string>;

struct BleuReport {
  double bleu = 0.0;
  std::array<double, 4> precisions{};
  std::array<std::size_t, 4> matches{};  // clipped n-gram matches per order
  std::array<std::size_t, 4> totals{};   // candidate n-grams per order
  double brevity_penalty = 0.0;
  std::size_t candidate_len = 0;
  std::size_t reference_len = 0;

  nlohmann::ordered_json to_json() const;
};

// Corpus-level 4-gram BLEU, one reference per candidate, no smoothing: any
// zero precision gives 0.
BleuReport bleu4(const std::vector<Tokens>& candidates, const std::vector<Tokens>& references);

}  // namespace gvmt::eval

#include "gvmt/eval/bleu.h"

#include <cmath>
#include <map>

#include "gvmt/errors.h"

namespace gvmt::eval {

namespace {

using NgramCounts = std::map<std::vector<std::string>, std::size_t>;

NgramCounts count_ngrams(const Tokens& s, std::size_t n) {
  NgramCounts out;
  for (std::size_t i = 0; i + n <= s.size(); ++i) ++out[Tokens(s.begin() + i, s.begin() + i + n)];
  return out;
}

}  // namespace

nlohmann::ordered_json BleuReport::to_json() const {
  nlohmann::ordered_json j;
  j["bleu"] = bleu;
  j["precisions"] = precisions;
  j["matches"] = matches;
  j["totals"] = totals;
  j["brevity_penalty"] = brevity_penalty;
  j["candidate_len"] = candidate_len;
  j["reference_len"] = reference_len;
  return j;
}

BleuReport bleu4(const std::vector<Tokens>& candidates, const std::vector<Tokens>& references) {
  if (candidates.empty()) throw DataError("bleu4: empty candidate list");
  if (candidates.size() != references.size()) {
    throw DataError("bleu4: " + std::to_string(candidates.size()) + " candidates but " +
                    std::to_string(references.size()) + " references");
  }
  BleuReport r;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    if (references[i].empty()) throw DataError("bleu4: reference " + std::to_string(i) + " is empty");
    r.candidate_len += candidates[i].size();
    r.reference_len += references[i].size();
    for (std::size_t n = 1; n <= 4; ++n) {
      const auto cand = count_ngrams(candidates[i], n);
      const auto ref = count_ngrams(references[i], n);
      for (const auto& [gram, count] : cand) {
        r.totals[n - 1] += count;
        auto it = ref.find(gram);
        if (it != ref.end()) r.matches[n - 1] += std::min(count, it->second);
      }
    }
  }
  double log_sum = 0.0;
  bool any_zero = false;
  for (std::size_t n = 0; n < 4; ++n) {
    r.precisions[n] = r.totals[n] ? static_cast<double>(r.matches[n]) / static_cast<double>(r.totals[n]) : 0.0;
    if (r.precisions[n] == 0.0) {
      any_zero = true;
    } else {
      log_sum += std::log(r.precisions[n]);
    }
  }
  const double c = static_cast<double>(r.candidate_len), ref_len = static_cast<double>(r.reference_len);
  r.brevity_penalty = r.candidate_len == 0 ? 0.0 : std::min(1.0, std::exp(1.0 - ref_len / c));
  r.bleu = any_zero ? 0.0 : r.brevity_penalty * std::exp(0.25 * log_sum);
  return r;
}

}  // namespace gvmt::eval

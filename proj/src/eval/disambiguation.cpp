#include "gvmt/eval/disambiguation.h"

#include <algorithm>
#include <map>

#include "gvmt/errors.h"

namespace gvmt::eval {

DisambiguationReport disambiguation_accuracy(std::span<const DecodedSample> decodes,
                                             std::span<const data::DisambiguationLabel> labels) {
  if (labels.empty()) throw DataError("disambiguation_accuracy: no labels");
  std::map<std::pair<std::string, std::size_t>, const DecodedSample*> by_id;
  for (const auto& d : decodes) {
    if (!by_id.emplace(std::pair(d.video_id, d.seg_idx), &d).second) {
      throw DataError("duplicate decode for " + d.video_id + "/" + std::to_string(d.seg_idx));
    }
  }
  DisambiguationReport r;
  for (const auto& l : labels) {
    auto it = by_id.find({l.video_id, l.seg_idx});
    if (it == by_id.end()) {
      throw DataError("label for " + l.video_id + "/" + std::to_string(l.seg_idx) + " has no matching decode");
    }
    const auto& t = it->second->tokens;
    const bool has_gold = std::find(t.begin(), t.end(), l.gold_form) != t.end();
    const bool has_other = std::find(t.begin(), t.end(), l.other_form) != t.end();
    r.correct += has_gold && !has_other;
    ++r.total;
  }
  r.accuracy = static_cast<double>(r.correct) / static_cast<double>(r.total);
  return r;
}

std::vector<data::DisambiguationLabel> labels_for(std::span<const data::DisambiguationLabel> labels,
                                                  const data::Corpus& corpus) {
  std::vector<data::DisambiguationLabel> out;
  for (const auto& l : labels) {
    auto it = std::lower_bound(corpus.begin(), corpus.end(), l.video_id,
                               [](const data::VideoSubtitles& v, const std::string& id) { return v.video_id < id; });
    if (it != corpus.end() && it->video_id == l.video_id && l.seg_idx < it->records.size()) out.push_back(l);
  }
  return out;
}

}  // namespace gvmt::eval

#pragma once

#include <span>
#include <string>
#include <vector>

#include "gvmt/dataio/corpus.h"
#include "gvmt/dataio/dataset.h"

namespace gvmt::eval {

struct DecodedSample {
  std::string video_id;
  std::size_t seg_idx = 0;
  std::vector<std::string> tokens;
};

struct DisambiguationReport {
  std::size_t correct = 0;
  std::size_t total = 0;
  double accuracy = 0.0;
};

// A label counts as correct when the decode contains the gold form and not
// the other one. Every label needs a decode of the same sample; an empty
// label list is an error.
DisambiguationReport disambiguation_accuracy(std::span<const DecodedSample> decodes,
                                             std::span<const data::DisambiguationLabel> labels);

// The labels whose sample belongs to `corpus`.
std::vector<data::DisambiguationLabel> labels_for(std::span<const data::DisambiguationLabel> labels,
                                                  const data::Corpus& corpus);

}  // namespace gvmt::eval

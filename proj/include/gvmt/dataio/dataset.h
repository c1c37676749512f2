#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "gvmt/dataio/corpus.h"
#include "gvmt/dataio/embed.h"
#include "gvmt/dataio/features.h"

namespace gvmt::data {

// Ground truth for one ambiguous source token.
struct DisambiguationLabel {
  std::string video_id;
  std::size_t seg_idx = 0;
  std::string gold_form;
  std::string other_form;
  bool local_marker = false;  // the segment itself carries the marker
};

void write_labels(const std::vector<DisambiguationLabel>& labels, const std::filesystem::path& path);
std::vector<DisambiguationLabel> load_labels(const std::filesystem::path& path);

// A dataset directory as written by the generator or assembled by hand.
struct Dataset {
  Corpus train, valid, test;
  FeatureStore features;
  EmbeddingStore embeddings;
  std::vector<DisambiguationLabel> labels;  // empty when labels.jsonl is absent

  const Corpus& split(const std::string& name) const;
};

Dataset load_dataset(const std::filesystem::path& dir);

// Every video of every split has features and embeddings covering exactly its
// segments, with one region/feature shape and one embedding dim throughout.
void validate_dataset(const Dataset& ds);

}  // namespace gvmt::data

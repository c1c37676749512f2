#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "gvmt/dataio/corpus.h"
#include "gvmt/dataio/dataset.h"
#include "gvmt/dataio/embed.h"
#include "gvmt/dataio/features.h"

namespace gvmt::data {

// Videos are built from interleaved "threads" of segments about one topic.
// Thread members are min_marker_gap positions apart and share a planted
// embedding direction. Each thread has a binary label deciding the target
// form of the ambiguous source word; only the thread's carrier segments show
// the label, as a marker code in their region features.
struct SyntheticConfig {
  std::size_t n_videos = 20;
  std::size_t segs_per_video = 36;
  double ambiguity_rate = 0.5;
  std::size_t regions = 4;
  std::size_t feature_dim = 16;
  std::uint64_t seed = 1;

  std::size_t embedding_dim = 64;
  std::size_t thread_size = 12;
  std::size_t carriers_per_thread = 2;
  std::size_t min_marker_gap = 3;
  std::size_t min_content_words = 2;
  std::size_t max_content_words = 3;
  double feature_noise = 0.3;
  double topic_scale = 1.0;
  double marker_scale = 2.0;
  // Norm of the noise added to the thread direction before normalizing.
  double member_spread = 0.6;
  double carrier_spread = 0.1;
  double valid_fraction = 0.1;
  double test_fraction = 0.2;
  std::size_t audit_p = 10;

  void validate() const;
};

inline constexpr const char* kAmbiguousWord = "dry";
inline constexpr const char* kAmbiguousForms[2] = {"ganzao", "ganhe"};

struct GenerationAudit {
  std::size_t n_videos = 0;
  std::size_t n_segments = 0;
  std::size_t n_ambiguous = 0;
  std::size_t n_context_only = 0;  // ambiguous, no marker in the segment itself
  std::size_t n_carriers = 0;
  std::size_t n_failures = 0;      // ambiguous samples without a matching marker in the top-P
  // Smallest distance from a context-only ambiguous segment to a carrier of
  // its own thread; 0 when there is none.
  std::size_t min_marker_distance = 0;
};

struct SyntheticDataset {
  Corpus corpus;
  std::vector<VideoFeatures> features;
  std::vector<VideoEmbeddings> embeddings;
  std::vector<DisambiguationLabel> labels;
  std::map<std::string, std::string> split;  // video_id -> train / valid / test
  // markers[v][j]: label shown by segment j of video v, or -1.
  std::vector<std::vector<int>> markers;
  std::vector<std::vector<std::size_t>> threads;  // thread id per segment
  GenerationAudit audit;
};

SyntheticDataset gen_synthetic(const SyntheticConfig& cfg);

// Exhaustive top-P scan over the planted embeddings.
GenerationAudit audit_synthetic(const SyntheticDataset& ds, std::size_t p);

// The same content as write_synthetic followed by load_dataset, in memory.
Dataset to_dataset(const SyntheticDataset& ds);

// train/valid/test.jsonl, labels.jsonl, features/, embeddings/, manifest.json.
void write_synthetic(const SyntheticDataset& ds, const SyntheticConfig& cfg, const std::filesystem::path& dir);

}  // namespace gvmt::data

#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "gvmt/dataio/corpus.h"

namespace gvmt::data {

// Unit-norm subtitle embeddings of one video, vectors[j] for segment j.
struct VideoEmbeddings {
  std::string video_id;
  std::size_t dim = 0;
  std::vector<std::vector<double>> vectors;
};

using EmbeddingStore = std::map<std::string, VideoEmbeddings>;

// Sum of seeded ±1 hash vectors of the tokens, L2-normalized. Integer
// arithmetic up to the final division, so results are order-independent and
// identical on every platform.
std::vector<double> toy_embed(const std::vector<std::string>& tokens, std::size_t dim, std::uint64_t seed);
VideoEmbeddings embed_video(const VideoSubtitles& video, std::size_t dim, std::uint64_t seed);

// <dir>/<video_id>.emb; values are stored as float32.
void write_embeddings(const VideoEmbeddings& emb, const std::filesystem::path& dir);
VideoEmbeddings read_embeddings(const std::filesystem::path& file);
EmbeddingStore load_embedding_dir(const std::filesystem::path& dir);

}  // namespace gvmt::data

#include "gvmt/dataio/embed.h"

#include <cmath>

#include "gvmt/dataio/binio.h"
#include "gvmt/errors.h"
#include "gvmt/numerics/rng.h"

namespace gvmt::data {

namespace {

constexpr std::string_view kMagic = "GVMTEMB1";

std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace

std::vector<double> toy_embed(const std::vector<std::string>& tokens, std::size_t dim, std::uint64_t seed) {
  if (tokens.empty()) throw DataError("toy_embed: empty text");
  if (dim < 8) throw ConfigError("toy_embed: dim must be at least 8, got " + std::to_string(dim));
  std::vector<std::int64_t> acc(dim, 0);
  const std::uint64_t salt = num::mix64(seed);
  for (const auto& t : tokens) {
    const std::uint64_t h = num::mix64(fnv1a(t) ^ salt);
    for (std::size_t d = 0; d < dim; ++d) {
      acc[d] += (num::mix64(h + d) & 1u) ? 1 : -1;
    }
  }
  std::int64_t sq = 0;
  for (auto a : acc) sq += a * a;
  std::vector<double> out(dim);
  if (sq == 0) {
    // Tokens cancelled exactly; fall back to a fixed direction.
    out[0] = 1.0;
    return out;
  }
  const double norm = std::sqrt(static_cast<double>(sq));
  for (std::size_t d = 0; d < dim; ++d) out[d] = static_cast<double>(acc[d]) / norm;
  return out;
}

VideoEmbeddings embed_video(const VideoSubtitles& video, std::size_t dim, std::uint64_t seed) {
  VideoEmbeddings e{video.video_id, dim, {}};
  for (const auto& r : video.records) e.vectors.push_back(toy_embed(r.source, dim, seed));
  return e;
}

void write_embeddings(const VideoEmbeddings& e, const std::filesystem::path& dir) {
  BinaryWriter w;
  w.bytes(kMagic);
  w.u32(static_cast<std::uint32_t>(e.vectors.size()));
  w.u32(static_cast<std::uint32_t>(e.dim));
  for (std::size_t j = 0; j < e.vectors.size(); ++j) {
    if (e.vectors[j].size() != e.dim) {
      throw ShapeError("embedding " + std::to_string(j) + " of " + e.video_id + " has dim " +
                       std::to_string(e.vectors[j].size()));
    }
    w.u32(static_cast<std::uint32_t>(j));
    for (double x : e.vectors[j]) w.f32(static_cast<float>(x));
  }
  write_file_atomic(dir / (e.video_id + ".emb"), w.buffer());
}

VideoEmbeddings read_embeddings(const std::filesystem::path& file) {
  BinaryReader r(read_file(file), file.string());
  r.expect_magic(kMagic);
  VideoEmbeddings e;
  e.video_id = file.stem().string();
  const std::size_t n = r.u32();
  e.dim = r.u32();
  if (n == 0 || e.dim == 0) throw DataError(file.string() + ": zero entries or dim");
  if (r.remaining() != n * (4 + 4 * e.dim)) throw DataError(file.string() + ": size does not match header");
  e.vectors.resize(n);
  for (std::size_t s = 0; s < n; ++s) {
    const std::size_t j = r.u32();
    if (j >= n) throw DataError(file.string() + ": seg_idx " + std::to_string(j) + " out of range");
    if (!e.vectors[j].empty()) throw DataError(file.string() + ": duplicate seg_idx " + std::to_string(j));
    e.vectors[j].resize(e.dim);
    for (auto& x : e.vectors[j]) {
      x = r.f32();
      if (!std::isfinite(x)) throw DataError(file.string() + ": non-finite value in entry " + std::to_string(j));
    }
  }
  return e;
}

EmbeddingStore load_embedding_dir(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) throw DataError("embedding directory " + dir.string() + " not found");
  EmbeddingStore store;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (entry.path().extension() != ".emb") continue;
    auto e = read_embeddings(entry.path());
    store.emplace(e.video_id, std::move(e));
  }
  return store;
}

}  // namespace gvmt::data

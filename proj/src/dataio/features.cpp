#include "gvmt/dataio/features.h"

#include <cmath>

#include "gvmt/dataio/binio.h"
#include "gvmt/errors.h"

namespace gvmt::data {

namespace {
constexpr std::string_view kMagic = "GVMTFEAT";
constexpr std::uint32_t kVersion = 1;
}  // namespace

void write_features(const VideoFeatures& f, const std::filesystem::path& dir) {
  BinaryWriter w;
  w.bytes(kMagic);
  w.u32(kVersion);
  w.u32(static_cast<std::uint32_t>(f.segments.size()));
  w.u32(static_cast<std::uint32_t>(f.regions));
  w.u32(static_cast<std::uint32_t>(f.dim));
  for (std::size_t j = 0; j < f.segments.size(); ++j) {
    const auto& t = f.segments[j];
    if (t.shape() != num::Shape{f.regions, f.dim}) {
      throw ShapeError("features of " + f.video_id + " segment " + std::to_string(j) + " have shape " +
                       num::shape_str(t.shape()));
    }
    w.u32(static_cast<std::uint32_t>(j));
    for (double x : t.data()) w.f32(static_cast<float>(x));
  }
  write_file_atomic(dir / (f.video_id + ".feat"), w.buffer());
}

VideoFeatures read_features(const std::filesystem::path& file) {
  BinaryReader r(read_file(file), file.string());
  r.expect_magic(kMagic);
  const auto version = r.u32();
  if (version != kVersion) throw DataError(file.string() + ": unsupported feature version " + std::to_string(version));
  VideoFeatures f;
  f.video_id = file.stem().string();
  const std::size_t n = r.u32();
  f.regions = r.u32();
  f.dim = r.u32();
  if (n == 0 || f.regions == 0 || f.dim == 0) throw DataError(file.string() + ": zero segments, regions or dim");
  if (r.remaining() != n * (4 + 4 * f.regions * f.dim)) {
    throw DataError(file.string() + ": size does not match header (" + std::to_string(r.remaining()) + " payload bytes)");
  }
  f.segments.resize(n);
  for (std::size_t s = 0; s < n; ++s) {
    const std::size_t j = r.u32();
    if (j >= n) throw DataError(file.string() + ": seg_idx " + std::to_string(j) + " out of range");
    if (f.segments[j].defined()) throw DataError(file.string() + ": duplicate seg_idx " + std::to_string(j));
    std::vector<double> data(f.regions * f.dim);
    for (auto& x : data) {
      x = r.f32();
      if (!std::isfinite(x)) throw DataError(file.string() + ": non-finite value in segment " + std::to_string(j));
    }
    f.segments[j] = num::Tensor::from_data({f.regions, f.dim}, std::move(data));
  }
  return f;
}

FeatureStore load_feature_dir(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) throw DataError("feature directory " + dir.string() + " not found");
  FeatureStore store;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (entry.path().extension() != ".feat") continue;
    auto f = read_features(entry.path());
    store.emplace(f.video_id, std::move(f));
  }
  return store;
}

}  // namespace gvmt::data

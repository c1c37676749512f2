#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "gvmt/numerics/tensor.h"

namespace gvmt::data {

// Region-grid features of every segment of one video; segments[j] is the
// [regions × dim] grid of segment j.
struct VideoFeatures {
  std::string video_id;
  std::size_t regions = 0;
  std::size_t dim = 0;
  std::vector<num::Tensor> segments;
};

using FeatureStore = std::map<std::string, VideoFeatures>;

// <dir>/<video_id>.feat; values are stored as float32.
void write_features(const VideoFeatures& features, const std::filesystem::path& dir);
VideoFeatures read_features(const std::filesystem::path& file);
// Every *.feat file in `dir`, keyed by file stem.
FeatureStore load_feature_dir(const std::filesystem::path& dir);

}  // namespace gvmt::data

#include "gvmt/dataio/dataset.h"

#include <cmath>
#include <fstream>
#include <optional>

#include <json.hpp>

#include "gvmt/errors.h"

namespace gvmt::data {

void write_labels(const std::vector<DisambiguationLabel>& labels, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  for (const auto& l : labels) {
    nlohmann::ordered_json obj;
    obj["video_id"] = l.video_id;
    obj["seg_idx"] = l.seg_idx;
    obj["gold"] = l.gold_form;
    obj["other"] = l.other_form;
    obj["local_marker"] = l.local_marker;
    out << obj.dump() << '\n';
  }
}

std::vector<DisambiguationLabel> load_labels(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open labels " + path.string());
  std::vector<DisambiguationLabel> labels;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      const auto obj = nlohmann::json::parse(line);
      labels.push_back({obj.at("video_id").get<std::string>(), obj.at("seg_idx").get<std::size_t>(),
                        obj.at("gold").get<std::string>(), obj.at("other").get<std::string>(),
                        obj.at("local_marker").get<bool>()});
    } catch (const nlohmann::json::exception& e) {
      throw DataError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return labels;
}

const Corpus& Dataset::split(const std::string& name) const {
  if (name == "train") return train;
  if (name == "valid") return valid;
  if (name == "test") return test;
  throw ConfigError("unknown split \"" + name + "\" (expected train, valid or test)");
}

Dataset load_dataset(const std::filesystem::path& dir) {
  Dataset ds;
  ds.train = load_corpus(dir / "train.jsonl");
  if (std::filesystem::exists(dir / "valid.jsonl")) ds.valid = load_corpus(dir / "valid.jsonl");
  if (std::filesystem::exists(dir / "test.jsonl")) ds.test = load_corpus(dir / "test.jsonl");
  ds.features = load_feature_dir(dir / "features");
  ds.embeddings = load_embedding_dir(dir / "embeddings");
  if (std::filesystem::exists(dir / "labels.jsonl")) ds.labels = load_labels(dir / "labels.jsonl");
  return ds;
}

void validate_dataset(const Dataset& ds) {
  std::optional<std::pair<std::size_t, std::size_t>> grid;
  std::optional<std::size_t> emb_dim;
  for (const Corpus* c : {&ds.train, &ds.valid, &ds.test}) {
    for (const auto& v : *c) {
      auto f = ds.features.find(v.video_id);
      if (f == ds.features.end()) throw DataError("no features for video " + v.video_id);
      if (f->second.segments.size() != v.records.size()) {
        throw DataError("video " + v.video_id + " has " + std::to_string(v.records.size()) + " subtitles but " +
                        std::to_string(f->second.segments.size()) + " feature segments");
      }
      const std::pair<std::size_t, std::size_t> g{f->second.regions, f->second.dim};
      if (grid && *grid != g) throw DataError("video " + v.video_id + " has a different region grid");
      grid = g;
      auto e = ds.embeddings.find(v.video_id);
      if (e == ds.embeddings.end()) throw DataError("no embeddings for video " + v.video_id);
      if (e->second.vectors.size() != v.records.size()) {
        throw DataError("video " + v.video_id + " has " + std::to_string(e->second.vectors.size()) +
                        " embeddings for " + std::to_string(v.records.size()) + " subtitles");
      }
      if (emb_dim && *emb_dim != e->second.dim) throw DataError("video " + v.video_id + " has a different embedding dim");
      emb_dim = e->second.dim;
      for (std::size_t j = 0; j < e->second.vectors.size(); ++j) {
        double sq = 0;
        for (double x : e->second.vectors[j]) sq += x * x;
        if (std::abs(std::sqrt(sq) - 1.0) > 1e-5) {
          throw DataError("embedding " + std::to_string(j) + " of video " + v.video_id + " is not unit-norm");
        }
      }
    }
  }
  if (ds.train.empty()) throw DataError("training split is empty");
}

}  // namespace gvmt::data

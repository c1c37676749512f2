#include "gvmt/dataio/synthetic.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include <json.hpp>

#include "gvmt/errors.h"
#include "gvmt/numerics/rng.h"

namespace gvmt::data {

namespace {

const std::vector<std::string> kTopics = {"river",  "forest", "desert", "harbor", "glacier", "market",
                                          "temple", "volcano", "meadow", "canyon", "island",  "village"};

const std::vector<std::string> kContent = {
    "old",   "small", "water", "stone", "wind",  "light", "people", "walk",  "see",   "long", "green", "cold",
    "road",  "tree",  "bird",  "fish",  "boat",  "house", "rain",   "sun",   "path",  "hill", "field", "sky",
    "snow",  "wall",  "bridge", "night", "child", "dog",  "fire",   "cloud", "sand",  "leaf", "morning", "valley"};

const std::vector<std::string> kSyllables = {"ba", "ke", "lo", "mi", "nu", "pa", "re", "si", "to", "vu", "wa", "zi"};

// Two-syllable pseudo-words, unique for index < 144.
std::string target_word(std::size_t index) {
  return kSyllables[(index / kSyllables.size()) % kSyllables.size()] + kSyllables[index % kSyllables.size()];
}

std::string translate(const std::string& word) {
  auto t = std::find(kTopics.begin(), kTopics.end(), word);
  if (t != kTopics.end()) return target_word(static_cast<std::size_t>(t - kTopics.begin()));
  auto c = std::find(kContent.begin(), kContent.end(), word);
  if (c != kContent.end()) return target_word(kTopics.size() + static_cast<std::size_t>(c - kContent.begin()));
  throw DataError("synthetic lexicon has no entry for \"" + word + "\"");
}

std::vector<double> random_code(num::Rng& rng, std::size_t dim) {
  std::vector<double> v(dim);
  const double s = 1.0 / std::sqrt(static_cast<double>(dim));
  for (auto& x : v) x = rng.normal() * s;
  return v;
}

std::vector<double> unit(std::vector<double> v) {
  double sq = 0;
  for (double x : v) sq += x * x;
  const double n = std::sqrt(sq);
  for (auto& x : v) x /= n;
  return v;
}

// Direction plus noise of the given norm (in expectation), normalized and
// rounded to what the float32 file format can hold.
std::vector<double> planted_vector(num::Rng& rng, const std::vector<double>& center, double spread) {
  auto noise = random_code(rng, center.size());
  std::vector<double> v(center.size());
  for (std::size_t d = 0; d < v.size(); ++d) v[d] = center[d] + spread * noise[d];
  v = unit(std::move(v));
  for (auto& x : v) x = static_cast<float>(x);
  return v;
}

}  // namespace

void SyntheticConfig::validate() const {
  auto positive = [](std::size_t v, const char* name) {
    if (v < 1) throw ConfigError(std::string(name) + " must be at least 1");
  };
  positive(n_videos, "n_videos");
  positive(segs_per_video, "segs_per_video");
  positive(regions, "regions");
  positive(feature_dim, "feature_dim");
  positive(thread_size, "thread_size");
  positive(carriers_per_thread, "carriers_per_thread");
  positive(min_marker_gap, "min_marker_gap");
  positive(audit_p, "audit_p");
  if (!(ambiguity_rate >= 0.0 && ambiguity_rate <= 1.0)) throw ConfigError("ambiguity_rate must be in [0,1]");
  if (embedding_dim < 8) throw ConfigError("embedding_dim must be at least 8");
  if (min_content_words > max_content_words) throw ConfigError("min_content_words exceeds max_content_words");
  if (!(valid_fraction >= 0 && test_fraction >= 0 && valid_fraction + test_fraction < 1)) {
    throw ConfigError("valid_fraction + test_fraction must be in [0,1)");
  }
  if (feature_noise < 0 || marker_scale < 0 || topic_scale < 0 || member_spread < 0 || carrier_spread < 0) {
    throw ConfigError("noise and scale parameters must be non-negative");
  }
}

SyntheticDataset gen_synthetic(const SyntheticConfig& cfg) {
  cfg.validate();
  num::Rng rng(cfg.seed);
  const std::size_t ev = cfg.feature_dim;

  std::vector<std::vector<double>> topic_codes;
  for (std::size_t t = 0; t < kTopics.size(); ++t) topic_codes.push_back(random_code(rng, ev));
  // Markers share a "carrier" component so that carriers can be recognised
  // independently of their label.
  const auto carrier_code = random_code(rng, ev);
  std::vector<std::vector<double>> marker_codes;
  for (int l = 0; l < 2; ++l) {
    auto d = random_code(rng, ev);
    for (std::size_t k = 0; k < ev; ++k) d[k] = (carrier_code[k] + d[k]) / std::sqrt(2.0);
    marker_codes.push_back(std::move(d));
  }

  const std::size_t n_test = static_cast<std::size_t>(std::floor(cfg.n_videos * cfg.test_fraction));
  const std::size_t n_valid = static_cast<std::size_t>(std::floor(cfg.n_videos * cfg.valid_fraction));
  const std::size_t n_train = cfg.n_videos - n_test - n_valid;

  SyntheticDataset ds;
  const std::size_t n = cfg.segs_per_video;
  for (std::size_t v = 0; v < cfg.n_videos; ++v) {
    char idbuf[32];
    std::snprintf(idbuf, sizeof idbuf, "v%04zu", v);
    const std::string vid = idbuf;
    ds.split[vid] = v < n_train ? "train" : v < n_train + n_valid ? "valid" : "test";

    const std::size_t n_threads =
        std::min(n, std::max(cfg.min_marker_gap, (n + cfg.thread_size - 1) / cfg.thread_size));
    std::vector<std::size_t> perm(n_threads);
    std::iota(perm.begin(), perm.end(), 0);
    rng.shuffle(perm);
    std::vector<std::size_t> thread_of(n);
    std::vector<std::vector<std::size_t>> members(n_threads);
    for (std::size_t p = 0; p < n; ++p) {
      thread_of[p] = perm[p % n_threads];
      members[thread_of[p]].push_back(p);
    }

    std::vector<std::size_t> topic_pool(kTopics.size());
    std::iota(topic_pool.begin(), topic_pool.end(), 0);
    rng.shuffle(topic_pool);
    std::vector<std::size_t> topic(n_threads);
    std::vector<int> label(n_threads);
    std::vector<std::vector<double>> center(n_threads);
    std::vector<int> marker(n, -1);
    for (std::size_t t = 0; t < n_threads; ++t) {
      topic[t] = t < topic_pool.size() ? topic_pool[t] : static_cast<std::size_t>(rng.below(kTopics.size()));
      label[t] = static_cast<int>(rng.below(2));
      center[t] = unit(random_code(rng, cfg.embedding_dim));
      auto m = members[t];
      rng.shuffle(m);
      for (std::size_t c = 0; c < std::min(cfg.carriers_per_thread, m.size()); ++c) marker[m[c]] = label[t];
    }

    VideoSubtitles subs{vid, {}};
    VideoFeatures feats{vid, cfg.regions, ev, {}};
    VideoEmbeddings embs{vid, cfg.embedding_dim, {}};
    for (std::size_t p = 0; p < n; ++p) {
      const std::size_t t = thread_of[p];
      std::vector<std::string> words{kTopics[topic[t]]};
      const std::size_t n_words =
          cfg.min_content_words + rng.below(cfg.max_content_words - cfg.min_content_words + 1);
      for (std::size_t k = 0; k < n_words; ++k) words.push_back(kContent[rng.below(kContent.size())]);
      rng.shuffle(words);
      std::vector<std::string> target;
      for (const auto& w : words) target.push_back(translate(w));
      if (rng.bernoulli(cfg.ambiguity_rate)) {
        const std::size_t at = rng.below(words.size() + 1);
        words.insert(words.begin() + static_cast<std::ptrdiff_t>(at), kAmbiguousWord);
        target.insert(target.begin() + static_cast<std::ptrdiff_t>(at), kAmbiguousForms[label[t]]);
        ds.labels.push_back({vid, p, kAmbiguousForms[label[t]], kAmbiguousForms[1 - label[t]], marker[p] >= 0});
      }
      subs.records.push_back({vid, p, std::move(words), std::move(target)});

      std::vector<double> grid(cfg.regions * ev);
      for (std::size_t r = 0; r < cfg.regions; ++r) {
        for (std::size_t k = 0; k < ev; ++k) {
          double x = cfg.feature_noise * rng.normal() + cfg.topic_scale * topic_codes[topic[t]][k];
          if (marker[p] >= 0) x += cfg.marker_scale * marker_codes[static_cast<std::size_t>(marker[p])][k];
          grid[r * ev + k] = static_cast<float>(x);
        }
      }
      feats.segments.push_back(num::Tensor::from_data({cfg.regions, ev}, std::move(grid)));
      embs.vectors.push_back(
          planted_vector(rng, center[t], marker[p] >= 0 ? cfg.carrier_spread : cfg.member_spread));
    }
    ds.corpus.push_back(std::move(subs));
    ds.features.push_back(std::move(feats));
    ds.embeddings.push_back(std::move(embs));
    ds.markers.push_back(std::move(marker));
    ds.threads.push_back(std::move(thread_of));
  }
  ds.audit = audit_synthetic(ds, cfg.audit_p);
  return ds;
}

GenerationAudit audit_synthetic(const SyntheticDataset& ds, std::size_t p) {
  GenerationAudit a;
  a.n_videos = ds.corpus.size();
  a.n_segments = corpus_size(ds.corpus);
  for (const auto& m : ds.markers) a.n_carriers += static_cast<std::size_t>(std::count_if(m.begin(), m.end(), [](int x) { return x >= 0; }));
  bool have_distance = false;
  for (const auto& label : ds.labels) {
    ++a.n_ambiguous;
    std::size_t v = 0;
    while (ds.corpus[v].video_id != label.video_id) ++v;
    const auto& emb = ds.embeddings[v].vectors;
    const auto& markers = ds.markers[v];
    const std::size_t i = label.seg_idx;
    const int gold = label.gold_form == kAmbiguousForms[0] ? 0 : 1;
    if (markers[i] < 0) {
      ++a.n_context_only;
      for (std::size_t j = 0; j < markers.size(); ++j) {
        if (markers[j] >= 0 && ds.threads[v][j] == ds.threads[v][i]) {
          const std::size_t d = j > i ? j - i : i - j;
          a.min_marker_distance = have_distance ? std::min(a.min_marker_distance, d) : d;
          have_distance = true;
        }
      }
    }
    std::vector<std::pair<double, std::size_t>> scored;
    for (std::size_t j = 0; j < emb.size(); ++j) {
      double dot = 0, ni = 0, nj = 0;
      for (std::size_t d = 0; d < emb[j].size(); ++d) {
        dot += emb[i][d] * emb[j][d];
        ni += emb[i][d] * emb[i][d];
        nj += emb[j][d] * emb[j][d];
      }
      scored.emplace_back(-dot / std::sqrt(ni * nj), j);
    }
    std::sort(scored.begin(), scored.end());
    bool found = false;
    for (std::size_t r = 0; r < std::min(p, scored.size()); ++r) found |= markers[scored[r].second] == gold;
    if (!found) ++a.n_failures;
  }
  return a;
}

Dataset to_dataset(const SyntheticDataset& ds) {
  Dataset out;
  for (const auto& v : ds.corpus) {
    const std::string& name = ds.split.at(v.video_id);
    if (name == "train") {
      out.train.push_back(v);
    } else if (name == "valid") {
      out.valid.push_back(v);
    } else {
      out.test.push_back(v);
    }
  }
  for (const auto& f : ds.features) out.features.emplace(f.video_id, f);
  for (const auto& e : ds.embeddings) out.embeddings.emplace(e.video_id, e);
  out.labels = ds.labels;
  return out;
}

void write_synthetic(const SyntheticDataset& ds, const SyntheticConfig& cfg, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir / "features", ec);
  std::filesystem::create_directories(dir / "embeddings", ec);
  if (ec) throw DataError("cannot create output directory " + dir.string() + ": " + ec.message());
  for (const char* name : {"train", "valid", "test"}) {
    Corpus part;
    for (const auto& v : ds.corpus) {
      if (ds.split.at(v.video_id) == name) part.push_back(v);
    }
    write_corpus(part, dir / (std::string(name) + ".jsonl"));
  }
  for (const auto& f : ds.features) write_features(f, dir / "features");
  for (const auto& e : ds.embeddings) write_embeddings(e, dir / "embeddings");
  write_labels(ds.labels, dir / "labels.jsonl");

  nlohmann::ordered_json m;
  m["generator"] = {{"n_videos", cfg.n_videos},
                    {"segs_per_video", cfg.segs_per_video},
                    {"ambiguity_rate", cfg.ambiguity_rate},
                    {"regions", cfg.regions},
                    {"feature_dim", cfg.feature_dim},
                    {"embedding_dim", cfg.embedding_dim},
                    {"seed", cfg.seed}};
  m["audit"] = {{"videos", ds.audit.n_videos},
                {"segments", ds.audit.n_segments},
                {"ambiguous", ds.audit.n_ambiguous},
                {"context_only", ds.audit.n_context_only},
                {"carriers", ds.audit.n_carriers},
                {"failures", ds.audit.n_failures},
                {"min_marker_distance", ds.audit.min_marker_distance}};
  std::ofstream out(dir / "manifest.json", std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write manifest in " + dir.string());
  out << m.dump(2) << '\n';
}

}  // namespace gvmt::data

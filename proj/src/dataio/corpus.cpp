#include "gvmt/dataio/corpus.h"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <map>
#include <sstream>

#include <json.hpp>

#include "gvmt/errors.h"

namespace gvmt::data {

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : text) {
    if (std::isspace(static_cast<unsigned char>(c))) {
      if (!cur.empty()) out.push_back(std::move(cur));
      cur.clear();
    } else {
      cur.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

std::string join_tokens(const std::vector<std::string>& tokens) {
  std::string s;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i) s += ' ';
    s += tokens[i];
  }
  return s;
}

namespace {

std::string where(const std::string& source, std::size_t line) {
  return source + ":" + std::to_string(line) + ": ";
}

const nlohmann::json& field(const nlohmann::json& obj, const char* key, const std::string& at) {
  auto it = obj.find(key);
  if (it == obj.end()) throw DataError(at + "missing field \"" + key + "\"");
  return *it;
}

}  // namespace

Corpus parse_corpus(std::istream& in, const std::string& source_name) {
  std::map<std::string, std::map<std::size_t, SubtitleRecord>> videos;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (std::all_of(line.begin(), line.end(), [](unsigned char c) { return std::isspace(c); })) continue;
    const std::string at = where(source_name, line_no);
    nlohmann::json obj;
    try {
      obj = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw DataError(at + "malformed JSON: " + e.what());
    }
    if (!obj.is_object()) throw DataError(at + "expected a JSON object");
    const auto& vid = field(obj, "video_id", at);
    const auto& seg = field(obj, "seg_idx", at);
    const auto& src = field(obj, "src", at);
    const auto& tgt = field(obj, "tgt", at);
    if (!vid.is_string() || vid.get<std::string>().empty()) throw DataError(at + "video_id must be a non-empty string");
    if (!seg.is_number_unsigned() && !(seg.is_number_integer() && seg.get<long long>() >= 0)) {
      throw DataError(at + "seg_idx must be a non-negative integer");
    }
    if (!src.is_string() || !tgt.is_string()) throw DataError(at + "src and tgt must be strings");

    SubtitleRecord rec;
    rec.video_id = vid.get<std::string>();
    rec.seg_idx = seg.get<std::size_t>();
    rec.source = tokenize(src.get<std::string>());
    rec.target = tokenize(tgt.get<std::string>());
    if (rec.source.empty() || rec.target.empty()) throw DataError(at + "empty src or tgt");
    auto& segs = videos[rec.video_id];
    if (segs.count(rec.seg_idx)) {
      throw DataError(at + "duplicate seg_idx " + std::to_string(rec.seg_idx) + " in video " + rec.video_id);
    }
    segs.emplace(rec.seg_idx, std::move(rec));
  }
  if (in.bad()) throw DataError(source_name + ": read error");

  Corpus corpus;
  for (auto& [id, segs] : videos) {
    VideoSubtitles v{id, {}};
    std::size_t expect = 0;
    for (auto& [idx, rec] : segs) {
      if (idx != expect) {
        throw DataError(source_name + ": video " + id + " has a gap in seg_idx: missing " + std::to_string(expect));
      }
      v.records.push_back(std::move(rec));
      ++expect;
    }
    corpus.push_back(std::move(v));
  }
  return corpus;
}

Corpus load_corpus(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open corpus " + path.string());
  return parse_corpus(in, path.string());
}

void write_corpus(const Corpus& corpus, const std::filesystem::path& path) {
  std::ostringstream out;
  for (const auto& v : corpus) {
    for (const auto& r : v.records) {
      nlohmann::ordered_json obj;
      obj["video_id"] = r.video_id;
      obj["seg_idx"] = r.seg_idx;
      obj["src"] = join_tokens(r.source);
      obj["tgt"] = join_tokens(r.target);
      out << obj.dump() << '\n';
    }
  }
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw DataError("cannot write corpus " + path.string());
  f << out.str();
  if (!f) throw DataError("short write to " + path.string());
}

std::size_t corpus_size(const Corpus& corpus) {
  std::size_t n = 0;
  for (const auto& v : corpus) n += v.records.size();
  return n;
}

const VideoSubtitles& find_video(const Corpus& corpus, std::string_view video_id) {
  auto it = std::lower_bound(corpus.begin(), corpus.end(), video_id,
                             [](const VideoSubtitles& v, std::string_view id) { return v.video_id < id; });
  if (it == corpus.end() || it->video_id != video_id) throw DataError("unknown video " + std::string(video_id));
  return *it;
}

}  // namespace gvmt::data

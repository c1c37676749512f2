#pragma once

#include <filesystem>
#include <istream>
#include <string>
#include <string_view>
#include <vector>

namespace gvmt::data {

struct SubtitleRecord {
  std::string video_id;
  std::size_t seg_idx = 0;
  std::vector<std::string> source;
  std::vector<std::string> target;
};

// All subtitles of one video; records[i].seg_idx == i.
struct VideoSubtitles {
  std::string video_id;
  std::vector<SubtitleRecord> records;
};

// Videos sorted by id.
using Corpus = std::vector<VideoSubtitles>;

// Whitespace split, ASCII lowercase.
std::vector<std::string> tokenize(std::string_view text);
std::string join_tokens(const std::vector<std::string>& tokens);

// JSON Lines, one {"video_id","seg_idx","src","tgt"} object per line.
Corpus parse_corpus(std::istream& in, const std::string& source_name);
Corpus load_corpus(const std::filesystem::path& path);
void write_corpus(const Corpus& corpus, const std::filesystem::path& path);

std::size_t corpus_size(const Corpus& corpus);
const VideoSubtitles& find_video(const Corpus& corpus, std::string_view video_id);

}  // namespace gvmt::data

#include "gvmt/dataio/vocab.h"

#include <set>

#include "gvmt/errors.h"

namespace gvmt::data {

namespace {
const std::vector<std::string> kReservedTokens = {"<pad>", "<s>", "</s>", "<unk>"};
}

Vocabulary::Vocabulary() : tokens_(kReservedTokens) { index(); }

void Vocabulary::index() {
  ids_.clear();
  for (std::size_t i = 0; i < tokens_.size(); ++i) {
    if (!ids_.emplace(tokens_[i], i).second) throw DataError("vocabulary: duplicate token \"" + tokens_[i] + "\"");
  }
}

Vocabulary Vocabulary::build(const std::vector<std::vector<std::string>>& sentences) {
  std::set<std::string> distinct;
  for (const auto& s : sentences) distinct.insert(s.begin(), s.end());
  Vocabulary v;
  for (const auto& t : distinct) {
    if (!v.ids_.count(t)) v.tokens_.push_back(t);
  }
  v.index();
  return v;
}

Vocabulary Vocabulary::from_tokens(std::vector<std::string> tokens) {
  if (tokens.size() < kReserved) throw DataError("vocabulary: missing reserved tokens");
  for (std::size_t i = 0; i < kReserved; ++i) {
    if (tokens[i] != kReservedTokens[i]) throw DataError("vocabulary: reserved token " + std::to_string(i) + " is \"" + tokens[i] + "\"");
  }
  Vocabulary v;
  v.tokens_ = std::move(tokens);
  v.index();
  return v;
}

std::size_t Vocabulary::id(std::string_view token) const {
  auto it = ids_.find(std::string(token));
  return it == ids_.end() ? kUnk : it->second;
}

bool Vocabulary::contains(std::string_view token) const { return ids_.count(std::string(token)) > 0; }

const std::string& Vocabulary::token(std::size_t id) const {
  if (id >= tokens_.size()) throw DataError("vocabulary: id " + std::to_string(id) + " out of range");
  return tokens_[id];
}

std::vector<std::size_t> Vocabulary::encode(const std::vector<std::string>& tokens) const {
  std::vector<std::size_t> out;
  out.reserve(tokens.size());
  for (const auto& t : tokens) out.push_back(id(t));
  return out;
}

std::vector<std::string> Vocabulary::decode(const std::vector<std::size_t>& ids) const {
  std::vector<std::string> out;
  for (auto i : ids) {
    if (i == kEos) break;
    if (i == kPad || i == kBos) continue;
    out.push_back(token(i));
  }
  return out;
}

}  // namespace gvmt::data

#pragma once

#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace gvmt::data {

class Vocabulary {
 public:
  static constexpr std::size_t kPad = 0;
  static constexpr std::size_t kBos = 1;
  static constexpr std::size_t kEos = 2;
  static constexpr std::size_t kUnk = 3;
  static constexpr std::size_t kReserved = 4;

  // Reserved tokens only.
  Vocabulary();
  // Reserved tokens followed by the distinct tokens in sorted order.
  static Vocabulary build(const std::vector<std::vector<std::string>>& sentences);
  // Inverse of tokens(); validates the reserved prefix and uniqueness.
  static Vocabulary from_tokens(std::vector<std::string> tokens);

  std::size_t size() const { return tokens_.size(); }
  std::size_t id(std::string_view token) const;  // kUnk when absent
  bool contains(std::string_view token) const;
  const std::string& token(std::size_t id) const;
  const std::vector<std::string>& tokens() const { return tokens_; }

  std::vector<std::size_t> encode(const std::vector<std::string>& tokens) const;
  // Stops at the first EOS and drops PAD/BOS.
  std::vector<std::string> decode(const std::vector<std::size_t>& ids) const;

  bool operator==(const Vocabulary& other) const { return tokens_ == other.tokens_; }

 private:
  void index();
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, std::size_t> ids_;
};

}  // namespace gvmt::data

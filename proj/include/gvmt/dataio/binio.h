#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

namespace gvmt::data {

// Little-endian encoder into an in-memory buffer, independent of host order.
class BinaryWriter {
 public:
  void bytes(std::string_view s) { buf_.append(s); }
  void u32(std::uint32_t v);
  void u64(std::uint64_t v);
  void f32(float v);
  void f64(double v);
  const std::string& buffer() const { return buf_; }

 private:
  std::string buf_;
};

// Bounds-checked little-endian decoder. Every short read throws DataError
// naming `what` and the offset.
class BinaryReader {
 public:
  BinaryReader(std::string data, std::string what) : data_(std::move(data)), what_(std::move(what)) {}

  void expect_magic(std::string_view magic);
  std::string bytes(std::size_t n);
  std::uint32_t u32();
  std::uint64_t u64();
  float f32();
  double f64();
  std::size_t remaining() const { return data_.size() - pos_; }
  bool at_end() const { return pos_ == data_.size(); }
  const std::string& what() const { return what_; }

 private:
  void need(std::size_t n);
  std::string data_;
  std::string what_;
  std::size_t pos_ = 0;
};

std::string read_file(const std::filesystem::path& path);
// Writes to a sibling temporary file, then renames over `path`.
void write_file_atomic(const std::filesystem::path& path, const std::string& contents);

}  // namespace gvmt::data

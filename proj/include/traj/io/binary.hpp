#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

// Little-endian byte packing shared by the checkpoint and dataset formats.

namespace traj::io {

class ByteWriter {
 public:
  void bytes(const void* data, std::size_t n);
  void u32(std::uint32_t v);
  void u64(std::uint64_t v);
  void f64(double v);

  std::size_t size() const { return buf_.size(); }
  std::string take() { return std::move(buf_); }

 private:
  std::string buf_;
};

// Every read names what it expected so truncation errors carry context and
// the byte offset at which they occurred.
class ByteReader {
 public:
  explicit ByteReader(std::string_view data) : data_(data) {}

  void bytes(void* out, std::size_t n, const char* what);
  std::string string(std::size_t n, const char* what);
  std::uint32_t u32(const char* what);
  std::uint64_t u64(const char* what);
  double f64(const char* what);

  std::uint64_t offset() const { return pos_; }
  std::uint64_t remaining() const { return data_.size() - pos_; }

 private:
  std::string_view data_;
  std::size_t pos_ = 0;
};

std::string read_file(const std::filesystem::path& path);
// Writes through a temporary sibling and renames, so readers never see a
// partial file.
void write_file(const std::filesystem::path& path, std::string_view bytes);

std::uint64_t fnv1a(std::string_view bytes, std::uint64_t seed = 0xcbf29ce484222325ULL);
std::string hex64(std::uint64_t v);

}  // namespace traj::io

#include "traj/io/binary.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include "traj/error.hpp"

namespace traj::io {

static_assert(std::endian::native == std::endian::little, "byte formats assume a little-endian host");

void ByteWriter::bytes(const void* data, std::size_t n) { buf_.append(static_cast<const char*>(data), n); }

void ByteWriter::u32(std::uint32_t v) { bytes(&v, sizeof(v)); }

void ByteWriter::u64(std::uint64_t v) { bytes(&v, sizeof(v)); }

void ByteWriter::f64(double v) { bytes(&v, sizeof(v)); }

void ByteReader::bytes(void* out, std::size_t n, const char* what) {
  if (n > remaining()) {
    throw ParseError(std::string("truncated input while reading ") + what, pos_);
  }
  std::memcpy(out, data_.data() + pos_, n);
  pos_ += n;
}

std::string ByteReader::string(std::size_t n, const char* what) {
  std::string s(n, '\0');
  bytes(s.data(), n, what);
  return s;
}

std::uint32_t ByteReader::u32(const char* what) {
  std::uint32_t v;
  bytes(&v, sizeof(v), what);
  return v;
}

std::uint64_t ByteReader::u64(const char* what) {
  std::uint64_t v;
  bytes(&v, sizeof(v), what);
  return v;
}

double ByteReader::f64(const char* what) {
  double v;
  bytes(&v, sizeof(v), what);
  return v;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw MissingArtifactError("cannot open " + path.string());
  return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

void write_file(const std::filesystem::path& path, std::string_view bytes) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + tmp.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw Error("write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

std::uint64_t fnv1a(std::string_view bytes, std::uint64_t seed) {
  std::uint64_t h = seed;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex64(std::uint64_t v) {
  static constexpr char digits[] = "0123456789abcdef";
  std::string s(16, '0');
  for (int i = 15; i >= 0; --i) {
    s[static_cast<std::size_t>(i)] = digits[v & 0xf];
    v >>= 4;
  }
  return s;
}

}  // namespace traj::io

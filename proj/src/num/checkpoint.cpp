#include "traj/num/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include "traj/error.hpp"
#include "traj/io/binary.hpp"

namespace traj::num {

namespace {

constexpr char kMagic[8] = {'T', 'R', 'J', 'C', 'K', 'P', 'T', '1'};
constexpr std::uint32_t kVersion = 1;

}  // namespace

std::string encode_checkpoint(const TensorMap& sections) {
  io::ByteWriter w;
  w.bytes(kMagic, sizeof(kMagic));
  w.u32(kVersion);
  w.u32(static_cast<std::uint32_t>(sections.size()));
  for (const auto& [name, t] : sections) {
    w.u32(static_cast<std::uint32_t>(name.size()));
    w.bytes(name.data(), name.size());
    w.u32(static_cast<std::uint32_t>(t.rank()));
    for (std::size_t d : t.shape()) w.u64(d);
    for (double v : t.data()) w.f64(v);
  }
  return w.take();
}

TensorMap decode_checkpoint(const std::string& bytes) {
  io::ByteReader r(bytes);
  char magic[8];
  r.bytes(magic, sizeof(magic), "checkpoint magic");
  if (std::memcmp(magic, kMagic, sizeof(magic)) != 0) throw ParseError("not a checkpoint file", 0);
  const std::uint64_t version_at = r.offset();
  if (r.u32("version") != kVersion) throw ParseError("unsupported checkpoint version", version_at);
  const std::uint32_t count = r.u32("section count");
  TensorMap out;
  for (std::uint32_t s = 0; s < count; ++s) {
    const std::uint32_t name_len = r.u32("section name length");
    std::string name = r.string(name_len, "section name");
    const std::uint32_t rank = r.u32("rank");
    std::vector<std::size_t> shape(rank);
    std::size_t total = 1;
    for (auto& d : shape) {
      const std::uint64_t at = r.offset();
      d = r.u64("dimension");
      if (d == 0 || d > r.remaining()) throw ParseError("invalid dimension in section '" + name + "'", at);
      total *= d;
    }
    if (total * sizeof(double) > r.remaining()) throw ParseError("truncated data in section '" + name + "'", r.offset());
    std::vector<double> data(total);
    for (double& v : data) v = r.f64("tensor data");
    out.emplace(std::move(name), Tensor(std::move(shape), std::move(data)));
  }
  if (r.remaining() != 0) throw ParseError("trailing bytes after checkpoint", r.offset());
  return out;
}

void write_checkpoint(const std::filesystem::path& path, const TensorMap& sections) {
  io::write_file(path, encode_checkpoint(sections));
}

TensorMap read_checkpoint(const std::filesystem::path& path) { return decode_checkpoint(io::read_file(path)); }

void store_parameters(TensorMap& map, const std::string& prefix, const std::vector<Parameter*>& params) {
  for (const Parameter* p : params) map[prefix + p->name] = p->value;
}

void load_parameters(const TensorMap& map, const std::string& prefix, const std::vector<Parameter*>& params) {
  for (Parameter* p : params) {
    auto it = map.find(prefix + p->name);
    if (it == map.end()) throw MissingArtifactError("checkpoint lacks section '" + prefix + p->name + "'");
    if (it->second.size() != p->value.size()) {
      throw DimensionError("checkpoint section '" + prefix + p->name + "' has shape " + it->second.shape_string() +
                           ", model expects " + p->value.shape_string());
    }
    p->value = Tensor(p->value.shape(), std::vector<double>(it->second.data().begin(), it->second.data().end()));
    p->grad = Tensor::zeros_like(p->value);
  }
}

}  // namespace traj::num

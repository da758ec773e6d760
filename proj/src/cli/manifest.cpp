#include "traj/cli/manifest.hpp"

#include <fcntl.h>
#include <openssl/evp.h>
#include <signal.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>
#include <fstream>
#include <nlohmann/json.hpp>
#include <sstream>

#include "traj/error.hpp"

namespace traj::cli {

namespace fs = std::filesystem;

std::string sha256_hex(const std::string& bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int length = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest, &length, EVP_sha256(), nullptr) != 1) {
    throw Error("sha256: digest failed");
  }
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < length; ++i) {
    out += hex[digest[i] >> 4];
    out += hex[digest[i] & 15];
  }
  return out;
}

std::string sha256_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw MissingArtifactError("cannot read " + path.string());
  std::ostringstream bytes;
  bytes << in.rdbuf();
  return sha256_hex(bytes.str());
}

Manifest Manifest::load(const fs::path& dir) {
  Manifest m;
  const fs::path path = dir / "manifest.json";
  if (!fs::exists(path)) return m;
  std::ifstream in(path);
  nlohmann::json j;
  try {
    in >> j;
    m.config_hash = j.value("config_hash", "");
    m.tool_version = j.value("tool_version", kToolVersion);
    for (const auto& [name, s] : j.at("stages").items()) {
      StageRecord r;
      r.config_hash = s.at("config_hash").get<std::string>();
      r.seed = s.at("seed").get<std::uint64_t>();
      r.inputs = s.at("inputs").get<std::map<std::string, std::string>>();
      r.outputs = s.at("outputs").get<std::map<std::string, std::string>>();
      r.wall_seconds = s.at("wall_seconds").get<double>();
      m.stages_[name] = r;
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error("corrupt manifest " + path.string() + ": " + e.what());
  }
  return m;
}

void Manifest::save(const fs::path& dir) const {
  nlohmann::json j;
  j["tool_version"] = tool_version;
  j["config_hash"] = config_hash;
  j["stages"] = nlohmann::json::object();
  for (const auto& [name, r] : stages_) {
    j["stages"][name] = {{"config_hash", r.config_hash},
                         {"seed", r.seed},
                         {"inputs", r.inputs},
                         {"outputs", r.outputs},
                         {"wall_seconds", r.wall_seconds}};
  }
  const fs::path tmp = dir / "manifest.json.tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    out << j.dump(2) << '\n';
    if (!out) throw Error("cannot write " + tmp.string());
  }
  fs::rename(tmp, dir / "manifest.json");
}

std::optional<StageRecord> Manifest::stage(const std::string& name) const {
  const auto it = stages_.find(name);
  if (it == stages_.end()) return std::nullopt;
  return it->second;
}

void Manifest::record(const std::string& name, const StageRecord& record) { stages_[name] = record; }

RunLock::RunLock(const fs::path& dir) : path_(dir / ".lock") {
  fs::create_directories(dir);
  for (int attempt = 0; attempt < 2; ++attempt) {
    const int fd = ::open(path_.c_str(), O_CREAT | O_EXCL | O_WRONLY, 0644);
    if (fd >= 0) {
      const std::string pid = std::to_string(::getpid()) + "\n";
      const auto written = ::write(fd, pid.data(), pid.size());
      ::close(fd);
      if (written != static_cast<ssize_t>(pid.size())) throw Error("cannot write lock file " + path_.string());
      return;
    }
    if (errno != EEXIST) throw Error("cannot create lock file " + path_.string() + ": " + std::strerror(errno));
    long owner = 0;
    std::ifstream(path_) >> owner;
    const bool alive = owner > 0 && (::kill(static_cast<pid_t>(owner), 0) == 0 || errno == EPERM);
    if (alive) {
      throw Error("run directory " + dir.string() + " is in use by process " + std::to_string(owner));
    }
    fs::remove(path_);
  }
  throw Error("cannot acquire lock " + path_.string());
}

RunLock::~RunLock() {
  std::error_code ec;
  fs::remove(path_, ec);
}

}  // namespace traj::cli

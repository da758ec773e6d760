#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>

namespace traj::cli {

inline constexpr const char* kToolVersion = "trajctl 1.0.0";

// Lowercase hex SHA-256.
std::string sha256_hex(const std::string& bytes);
std::string sha256_file(const std::filesystem::path& path);

struct StageRecord {
  std::string config_hash;  // hash of the stage's config sections and seed
  std::uint64_t seed = 0;
  std::map<std::string, std::string> inputs;   // file name -> hash
  std::map<std::string, std::string> outputs;  // file name -> hash
  double wall_seconds = 0.0;
};

// manifest.json in the run directory.
class Manifest {
 public:
  static Manifest load(const std::filesystem::path& dir);
  void save(const std::filesystem::path& dir) const;

  std::optional<StageRecord> stage(const std::string& name) const;
  void record(const std::string& name, const StageRecord& record);

  std::string config_hash;
  std::string tool_version = kToolVersion;

 private:
  std::map<std::string, StageRecord> stages_;
};

// Exclusive ownership of a run directory for the lifetime of the object.
// A lock left by a process that no longer exists is taken over.
class RunLock {
 public:
  explicit RunLock(const std::filesystem::path& dir);
  ~RunLock();
  RunLock(const RunLock&) = delete;
  RunLock& operator=(const RunLock&) = delete;

 private:
  std::filesystem::path path_;
};

}  // namespace traj::cli

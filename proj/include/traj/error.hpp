#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace traj {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Incompatible tensor shapes.
class DimensionError : public Error {
 public:
  using Error::Error;
};

// NaN/Inf produced by an operation. Carries the op name and its node id.
class NumericError : public Error {
 public:
  NumericError(const std::string& op, int node_id, const std::string& detail = {})
      : Error("non-finite value in op '" + op + "' (node " + std::to_string(node_id) + ")" +
              (detail.empty() ? "" : ": " + detail)),
        op_(op),
        node_id_(node_id) {}
  explicit NumericError(const std::string& what) : Error(what), node_id_(-1) {}

  const std::string& op() const { return op_; }
  int node_id() const { return node_id_; }

 private:
  std::string op_;
  int node_id_;
};

// Operation invoked in the wrong lifecycle state (e.g. backward twice).
class StateError : public Error {
 public:
  using Error::Error;
};

class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::uint64_t offset)
      : Error(what + " (at byte offset " + std::to_string(offset) + ")"), offset_(offset) {}

  std::uint64_t offset() const { return offset_; }

 private:
  std::uint64_t offset_;
};

class GenerationError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class MissingArtifactError : public Error {
 public:
  using Error::Error;
};

class DivergenceError : public Error {
 public:
  using Error::Error;
};

}  // namespace traj

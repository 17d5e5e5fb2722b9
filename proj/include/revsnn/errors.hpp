#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace revsnn {

/// Base class for all library errors.
class Error : public std::runtime_error {
public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

/// Dimension mismatch. Carries the operation, the offending axis and the
/// expected/actual extents so callers can report precisely.
class ShapeError : public Error {
public:
  ShapeError(std::string op, int axis, std::int64_t expected, std::int64_t got)
      : Error(op + ": axis " + std::to_string(axis) + " mismatch, expected " +
              std::to_string(expected) + ", got " + std::to_string(got)),
        op_(std::move(op)), axis_(axis), expected_(expected), got_(got) {}

  ShapeError(std::string op, std::string detail)
      : Error(op + ": " + detail), op_(std::move(op)), axis_(-1), expected_(0), got_(0) {}

  const std::string& op() const { return op_; }
  int axis() const { return axis_; }
  std::int64_t expected() const { return expected_; }
  std::int64_t got() const { return got_; }

private:
  std::string op_;
  int axis_;
  std::int64_t expected_;
  std::int64_t got_;
};

/// Violated API precondition (replay without stats, unreset state, ...).
class ContractError : public Error {
public:
  explicit ContractError(const std::string& msg) : Error(msg) {}
};

/// Memory ledger corruption: a free without a matching alloc.
class LedgerError : public Error {
public:
  explicit LedgerError(const std::string& msg) : Error(msg) {}
};

/// Run-configuration problem. Carries key and line for diagnostics.
class ConfigError : public Error {
public:
  ConfigError(std::string key, int line, const std::string& msg)
      : Error("config: " + msg + (key.empty() ? "" : " (key '" + key + "'") +
              (key.empty() ? "" : (line > 0 ? ", line " + std::to_string(line) + ")" : ")"))),
        key_(std::move(key)), line_(line) {}

  const std::string& key() const { return key_; }
  int line() const { return line_; }

private:
  std::string key_;
  int line_;
};

/// File/serialization problem (IDX containers, report files).
class IoError : public Error {
public:
  explicit IoError(const std::string& msg) : Error(msg) {}
};

}  // namespace revsnn

#pragma once

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace ddg {

/// Base of every error raised by the library. `category()` is what the CLI
/// maps onto exit codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
  virtual const char* category() const noexcept { return "error"; }
};

class ShapeError : public Error {
 public:
  using Error::Error;
  const char* category() const noexcept override { return "shape"; }
};

class DomainError : public Error {
 public:
  using Error::Error;
  const char* category() const noexcept override { return "domain"; }
};

class NumericError : public Error {
 public:
  using Error::Error;
  const char* category() const noexcept override { return "numeric"; }
};

/// Violated pre/post condition between cooperating components (e.g. a tape
/// handed to the wrong layer).
class ContractError : public Error {
 public:
  using Error::Error;
  const char* category() const noexcept override { return "contract"; }
};

class ConfigError : public Error {
 public:
  using Error::Error;
  const char* category() const noexcept override { return "config"; }
};

class IoError : public Error {
 public:
  using Error::Error;
  const char* category() const noexcept override { return "io"; }
};

class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t offset)
      : Error(what + " (at byte offset " + std::to_string(offset) + ")"), offset_(offset) {}
  std::size_t offset() const noexcept { return offset_; }
  const char* category() const noexcept override { return "io"; }

 private:
  std::size_t offset_;
};

/// The delayed-gradient schedule found a missing or mismatched tape/delta.
class ScheduleError : public Error {
 public:
  using Error::Error;
  const char* category() const noexcept override { return "schedule"; }
};

/// Loss or gradient became non-finite at iteration `iteration()`.
class DivergenceError : public NumericError {
 public:
  DivergenceError(const std::string& what, std::int64_t iteration)
      : NumericError(what + " at iteration " + std::to_string(iteration)), iteration_(iteration) {}
  std::int64_t iteration() const noexcept { return iteration_; }
  const char* category() const noexcept override { return "divergence"; }

 private:
  std::int64_t iteration_;
};

}  // namespace ddg

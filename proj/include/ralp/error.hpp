#pragma once

#include <stdexcept>
#include <string>

namespace ralp {

/// Base class for every error raised by the planner and simulator.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed descriptor or scenario text. Line and column are 1-based; zero
/// means "not applicable" (e.g. a file that could not be opened).
class ParseError : public Error {
 public:
  ParseError(std::string source, int line, int column, const std::string& what);

  const std::string& source() const noexcept { return source_; }
  int line() const noexcept { return line_; }
  int column() const noexcept { return column_; }

 private:
  std::string source_;
  int line_;
  int column_;
};

/// Two adjacent layers disagree on the tensor passed between them.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// Catalog lookup for a benchmark that is not encoded.
class UnknownModelError : public Error {
 public:
  using Error::Error;
};

/// A precondition on an argument was violated (nonpositive sizes, split out of
/// range, fewer than two layers, ...).
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// Jobs do not fit the cluster, or two jobs claim the same GPU slot.
class CapacityError : public Error {
 public:
  using Error::Error;
};

}  // namespace ralp

#include "ralp/error.hpp"

#include <fmt/format.h>

namespace ralp {

namespace {

std::string located(const std::string& source, int line, int column, const std::string& what) {
  if (line <= 0) return fmt::format("{}: {}", source, what);
  if (column <= 0) return fmt::format("{}:{}: {}", source, line, what);
  return fmt::format("{}:{}:{}: {}", source, line, column, what);
}

}  // namespace

ParseError::ParseError(std::string source, int line, int column, const std::string& what)
    : Error(located(source, line, column, what)), source_(std::move(source)), line_(line), column_(column) {}

}  // namespace ralp

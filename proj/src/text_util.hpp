#pragma once

// Shared lexing helpers for the descriptor and scenario formats.

#include <array>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace ralp::detail {

struct Token {
  std::string text;
  int column = 1;  // 1-based
};

inline std::string to_lower(std::string_view s) {
  std::string out(s);
  for (auto& c : out)
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
  return out;
}

inline std::vector<std::string_view> split_lines(std::string_view text) {
  std::vector<std::string_view> lines;
  std::size_t start = 0;
  while (start <= text.size()) {
    auto end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    auto line = text.substr(start, end - start);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    lines.push_back(line);
    if (end == text.size()) break;
    start = end + 1;
  }
  return lines;
}

// Whitespace-separated tokens; '#' starts a comment that runs to end of line.
inline std::vector<Token> tokenize(std::string_view line) {
  std::vector<Token> out;
  std::size_t i = 0;
  while (i < line.size()) {
    const char c = line[i];
    if (c == '#') break;
    if (c == ' ' || c == '\t') {
      ++i;
      continue;
    }
    std::size_t j = i;
    while (j < line.size() && line[j] != ' ' && line[j] != '\t' && line[j] != '#') ++j;
    out.push_back({std::string(line.substr(i, j - i)), static_cast<int>(i) + 1});
    i = j;
  }
  return out;
}

inline std::optional<std::int64_t> parse_int(std::string_view s) {
  std::int64_t v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) return std::nullopt;
  return v;
}

inline std::optional<std::uint64_t> parse_uint(std::string_view s) {
  if (!s.empty() && s.front() == '-') return std::nullopt;
  std::uint64_t v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) return std::nullopt;
  return v;
}

// Accepts decimal/scientific notation and "inf".
inline std::optional<double> parse_real(std::string_view s) {
  const auto lower = to_lower(s);
  if (lower == "inf" || lower == "infinity") return HUGE_VAL;
  double v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || std::isnan(v)) return std::nullopt;
  return v;
}

// "HxWxC" with positive extents.
inline std::optional<std::array<std::int64_t, 3>> parse_shape(std::string_view s) {
  std::array<std::int64_t, 3> dims{};
  std::size_t start = 0;
  for (int d = 0; d < 3; ++d) {
    auto end = d < 2 ? s.find('x', start) : s.size();
    if (end == std::string_view::npos) return std::nullopt;
    auto v = parse_int(s.substr(start, end - start));
    if (!v || *v <= 0) return std::nullopt;
    dims[static_cast<std::size_t>(d)] = *v;
    start = end + 1;
  }
  return dims;
}

}  // namespace ralp::detail

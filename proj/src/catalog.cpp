#include "ralp/catalog.hpp"

#include <fmt/format.h>
#include <fmt/ranges.h>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>

#include "ralp/error.hpp"
#include "text_util.hpp"

namespace ralp {

namespace {

namespace fs = std::filesystem;

std::string normalize(std::string_view name) {
  std::string out;
  for (char c : detail::to_lower(name))
    if (c != '-' && c != '_') out += c;
  if (out == "inception3") out = "inceptionv3";
  return out;
}

std::optional<fs::path> override_dir() {
  const char* env = std::getenv(kCatalogDirEnv);
  if (env == nullptr || *env == '\0') return std::nullopt;
  return fs::path(env);
}

std::vector<std::string> names_in(const fs::path& dir) {
  std::vector<std::string> names;
  std::error_code ec;
  for (fs::directory_iterator it(dir, ec), end; !ec && it != end; it.increment(ec))
    if (it->is_regular_file() && it->path().extension() == ".model") names.push_back(it->path().stem().string());
  std::sort(names.begin(), names.end());
  return names;
}

}  // namespace

std::vector<std::string> catalog_names() {
  if (auto dir = override_dir()) return names_in(*dir);
  std::vector<std::string> names;
  for (const auto& e : detail::embedded_catalog()) names.emplace_back(e.name);
  std::sort(names.begin(), names.end());
  return names;
}

std::string catalog_descriptor(std::string_view name) {
  const auto wanted = normalize(name);
  if (auto dir = override_dir()) {
    for (const auto& n : names_in(*dir)) {
      if (normalize(n) != wanted) continue;
      std::ifstream in(*dir / (n + ".model"));
      std::stringstream buffer;
      buffer << in.rdbuf();
      return buffer.str();
    }
  } else {
    for (const auto& e : detail::embedded_catalog())
      if (normalize(e.name) == wanted) return e.text;
  }
  throw UnknownModelError(
      fmt::format("unknown benchmark '{}'; available: {}", name, fmt::join(catalog_names(), ", ")));
}

ModelGraph catalog_lookup(std::string_view name) {
  return parse_model(catalog_descriptor(name), fmt::format("catalog:{}", name));
}

}  // namespace ralp

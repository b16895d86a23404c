#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "ralp/model_ir.hpp"

namespace ralp {

/// Environment variable naming a directory of `<name>.model` files that
/// replaces the bundled catalog.
inline constexpr const char* kCatalogDirEnv = "RALP_CATALOG_DIR";

/// Names available for catalog_lookup, sorted.
std::vector<std::string> catalog_names();

/// Descriptor text of a catalog entry. Names match case-insensitively and
/// ignore '-' and '_' ("ResNet50" finds "resnet-50"). Throws
/// UnknownModelError listing the available names.
std::string catalog_descriptor(std::string_view name);

ModelGraph catalog_lookup(std::string_view name);

namespace detail {

struct EmbeddedDescriptor {
  const char* name;
  const char* text;
};

const std::vector<EmbeddedDescriptor>& embedded_catalog();

}  // namespace detail

}  // namespace ralp

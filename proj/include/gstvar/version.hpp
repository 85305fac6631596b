#pragma once

namespace gstvar {
inline constexpr const char* kVersion = "0.1.0";
inline constexpr const char* kModelSchemaVersion = "1.0";
}  // namespace gstvar

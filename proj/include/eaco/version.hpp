#pragma once

namespace eaco {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace eaco

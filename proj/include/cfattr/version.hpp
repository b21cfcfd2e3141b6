#pragma once

namespace cfattr {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace cfattr

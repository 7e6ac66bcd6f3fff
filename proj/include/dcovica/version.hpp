#pragma once

namespace dcovica {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace dcovica

#pragma once

namespace harvest {
inline constexpr const char* kVersion = "0.1.0";
}

#pragma once

namespace latgas {
inline constexpr const char* kVersion = "0.1.0";
}

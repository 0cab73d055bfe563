#pragma once

namespace underspec {
inline constexpr const char* kVersion = "1.0.0";
}

#pragma once

namespace empcal {
inline constexpr const char* kVersion = "0.3.0";
}

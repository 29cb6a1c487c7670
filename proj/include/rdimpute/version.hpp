#pragma once

namespace rdimpute {
inline constexpr const char* kVersion = "0.1.0";
}

#pragma once

namespace ksb {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace ksb

#pragma once

namespace deepcontrast {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace deepcontrast

#pragma once

namespace mtfdd {

inline constexpr const char* version_string = "mtfdd 0.1.0";

}  // namespace mtfdd

#pragma once

namespace umbra {

inline constexpr const char* kToolName = "umbrakit";
inline constexpr const char* kToolVersion = "0.1.0";

}  // namespace umbra

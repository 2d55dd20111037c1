#pragma once

namespace flowsm {

inline constexpr const char* kToolName = "flowsm";
inline constexpr const char* kToolVersion = "0.1.0";

}  // namespace flowsm

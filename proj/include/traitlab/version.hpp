#pragma once

namespace traitlab {

inline constexpr const char* kToolVersion = "0.1.0";

}  // namespace traitlab

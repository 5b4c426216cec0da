#pragma once

namespace gmmamp {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace gmmamp

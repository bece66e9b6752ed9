#pragma once

namespace osbm {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace osbm

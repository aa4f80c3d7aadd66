#pragma once

namespace markovcp {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace markovcp

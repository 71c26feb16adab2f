#pragma once

namespace exergm {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace exergm

#pragma once

namespace fbe {

inline constexpr const char* kToolVersion = "fbe 0.1.0";

}  // namespace fbe

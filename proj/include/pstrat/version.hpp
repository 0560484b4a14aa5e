#pragma once

namespace pstrat {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace pstrat

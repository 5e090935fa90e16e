#pragma once

namespace pmc {

inline constexpr const char* version = "0.1.0";

}  // namespace pmc

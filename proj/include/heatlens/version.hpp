#pragma once

namespace heatlens {

inline constexpr const char* version = "0.1.0";

}  // namespace heatlens

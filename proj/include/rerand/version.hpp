#pragma once

namespace rerand {

inline constexpr const char* version = "0.1.0";

}  // namespace rerand

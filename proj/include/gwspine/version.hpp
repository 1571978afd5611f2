#pragma once

namespace gwspine {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace gwspine

#pragma once

#include <string>

namespace cgp {

enum class Direction { maximize, minimize };

/// True when `a` is strictly better than `b`.
inline bool better(double a, double b, Direction dir) {
  return dir == Direction::maximize ? a > b : a < b;
}

inline std::string to_string(Direction dir) {
  return dir == Direction::maximize ? "maximize" : "minimize";
}

Direction direction_from_string(const std::string& s);

}  // namespace cgp

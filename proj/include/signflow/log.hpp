#pragma once

#include <iostream>
#include <mutex>
#include <string>

namespace signflow::log {

inline std::mutex& mutex() {
  static std::mutex m;
  return m;
}

inline void info(const std::string& msg) {
  std::lock_guard lock(mutex());
  std::cerr << "[signflow] " << msg << "\n";
}

inline void warn(const std::string& msg) {
  std::lock_guard lock(mutex());
  std::cerr << "[signflow] warning: " << msg << "\n";
}

}  // namespace signflow::log

// Small shared helpers: hashing, float formatting, file io.
#pragma once

#include <cstdint>
#include <cstdio>
#include <stdexcept>
#include <string>

namespace pickbench {

inline uint64_t fnv1a64(const std::string& data) {
  uint64_t h = 0xCBF29CE484222325ULL;
  for (unsigned char c : data) {
    h ^= c;
    h *= 0x100000001B3ULL;
  }
  return h;
}

inline std::string hex64(uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

// Formats a float with 9 significant digits, enough to round-trip any
// 32-bit value through decimal text.
inline std::string fmt_f32(float v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.9g", static_cast<double>(v));
  return buf;
}

std::string read_file(const std::string& path);
void write_file(const std::string& path, const std::string& content);
// write to path.tmp then rename over path
void write_file_atomic(const std::string& path, const std::string& content);

}  // namespace pickbench

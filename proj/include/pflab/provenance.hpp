#pragma once

#include <cstdint>
#include <string>

namespace pflab {

inline constexpr const char* kVersion = "0.1.0";

// Stamped into every artifact so outputs can be traced to the run that made them.
struct Provenance {
  std::string version = kVersion;
  std::string config_hash = "0";
  uint64_t seed = 0;
};

// FNV-1a over the bytes of `text`, hex-encoded.
std::string fnv1a_hex(const std::string& text);

// Writes via a temp file in the same directory plus rename, so readers never
// observe a half-written artifact. Creates parent directories as needed.
void write_file_atomic(const std::string& path, const std::string& content);

std::string read_file(const std::string& path);

// %.17g, enough digits to round-trip a double exactly.
std::string format_double(double v);

}  // namespace pflab

#pragma once

#include <cstdint>
#include <cstdio>
#include <ostream>
#include <string>

namespace torusdm {

inline constexpr const char* kToolVersion = "0.1.0";

/// Shortest-faithful decimal form of a double ("%.17g").
inline std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

/// Provenance comment emitted at the top of every CSV the tool writes.
inline void write_provenance(std::ostream& os, const std::string& command,
                             std::uint64_t config_hash, std::uint64_t seed) {
  char buf[128];
  std::snprintf(buf, sizeof(buf), "# torusdm %s %s config=%016llx seed=%llu\n",
                kToolVersion, command.c_str(),
                static_cast<unsigned long long>(config_hash),
                static_cast<unsigned long long>(seed));
  os << buf;
}

}  // namespace torusdm

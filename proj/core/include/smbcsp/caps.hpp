#pragma once

#include <cstdint>
#include <string>

namespace smbcsp {

// Resource caps. Exceeding any of them raises Error(cap_exceeded); results are
// never silently truncated. Defaults can be overridden through the
// SMB_CSP_CAPS environment variable, e.g. "closure=500000,oracle=2000000".
struct Caps {
  std::int64_t closure = 200000;       // max maps/tuples in any closure
  std::int64_t oracle = 10000000;      // max assignments brute force may enumerate
  std::int64_t collapsing = 8;         // max |R| for collapsing-polynomial search
  std::int64_t memo_entries = 20000;   // LRU capacity of the solver memo table
};

// Process-wide caps, initialised once from the environment.
const Caps& caps();

// Parses an override string; throws Error(invalid_input) on malformed input.
Caps parse_caps(const std::string& spec, Caps base);

// Test hook: replaces the process-wide caps.
void set_caps_for_testing(const Caps& c);

}  // namespace smbcsp

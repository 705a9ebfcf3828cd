#include "smbcsp/caps.hpp"

#include <cstdlib>
#include <mutex>

#include "smbcsp/error.hpp"

namespace smbcsp {

namespace {
Caps g_caps;
std::once_flag g_init;

void init_from_env() {
  const char* env = std::getenv("SMB_CSP_CAPS");
  if (env != nullptr && *env != '\0') {
    g_caps = parse_caps(env, Caps{});
  }
}
}  // namespace

const Caps& caps() {
  std::call_once(g_init, init_from_env);
  return g_caps;
}

Caps parse_caps(const std::string& spec, Caps base) {
  Caps out = base;
  std::size_t pos = 0;
  while (pos < spec.size()) {
    std::size_t end = spec.find(',', pos);
    if (end == std::string::npos) end = spec.size();
    std::string item = spec.substr(pos, end - pos);
    std::size_t eq = item.find('=');
    if (eq == std::string::npos) {
      throw Error(ErrorCode::invalid_input, "caps: expected key=value in '" + item + "'");
    }
    std::string key = item.substr(0, eq);
    std::int64_t value = 0;
    try {
      value = std::stoll(item.substr(eq + 1));
    } catch (const std::exception&) {
      throw Error(ErrorCode::invalid_input, "caps: bad number in '" + item + "'");
    }
    if (value <= 0) {
      throw Error(ErrorCode::invalid_input, "caps: value must be positive in '" + item + "'");
    }
    if (key == "closure") {
      out.closure = value;
    } else if (key == "oracle") {
      out.oracle = value;
    } else if (key == "collapsing") {
      out.collapsing = value;
    } else if (key == "memo") {
      out.memo_entries = value;
    } else {
      throw Error(ErrorCode::invalid_input, "caps: unknown key '" + key + "'");
    }
    pos = end + 1;
  }
  return out;
}

void set_caps_for_testing(const Caps& c) {
  std::call_once(g_init, [] {});
  g_caps = c;
}

}  // namespace smbcsp

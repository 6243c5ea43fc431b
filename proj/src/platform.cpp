#include "sds/platform.hpp"

#include <sys/utsname.h>

#include <algorithm>
#include <cctype>
#include <cstdlib>

#include "sds/error.hpp"

namespace sds {

namespace {

bool valid_token(std::string_view t) {
  return !t.empty() && std::all_of(t.begin(), t.end(), [](char c) {
    return (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') || c == '_';
  });
}

std::string normalize(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) {
    if (c == '-' || c == ' ') return '_';
    return static_cast<char>(std::tolower(c));
  });
  return s;
}

}  // namespace

Platform Platform::parse(std::string_view text) {
  if (text == "any") return Platform::any();
  const auto dash = text.find('-');
  if (dash == std::string_view::npos) {
    throw Error(Errc::InvalidPlatform, "platform '" + std::string(text) + "' is not <os>-<arch>");
  }
  Platform p;
  p.any_ = false;
  p.os_ = std::string(text.substr(0, dash));
  p.arch_ = std::string(text.substr(dash + 1));
  if (!valid_token(p.os_) || !valid_token(p.arch_)) {
    throw Error(Errc::InvalidPlatform, "platform '" + std::string(text) + "' is not <os>-<arch>");
  }
  return p;
}

Platform Platform::host() {
  if (const char* forced = std::getenv("SDS_PLATFORM"); forced && *forced) return parse(forced);
  utsname u{};
  if (uname(&u) != 0) return Platform::any();
  Platform p;
  p.any_ = false;
  p.os_ = normalize(u.sysname);
  p.arch_ = normalize(u.machine);
  return p;
}

bool Platform::matches(const Platform& target) const noexcept {
  if (any_ || target.any_) return true;
  return os_ == target.os_ && arch_ == target.arch_;
}

}  // namespace sds

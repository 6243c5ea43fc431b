#include "sds/version.hpp"

#include <algorithm>
#include <cctype>

#include "sds/error.hpp"

namespace sds {

namespace {

bool is_digit(char c) noexcept { return c >= '0' && c <= '9'; }
bool is_alpha(char c) noexcept { return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z'); }
char lower(char c) noexcept { return (c >= 'A' && c <= 'Z') ? static_cast<char>(c - 'A' + 'a') : c; }

// Next maximal run of digits or of letters starting at pos.
std::string_view next_run(std::string_view s, std::size_t& pos) noexcept {
  const std::size_t start = pos;
  const bool digits = is_digit(s[pos]);
  while (pos < s.size() && is_digit(s[pos]) == digits) ++pos;
  return s.substr(start, pos - start);
}

std::strong_ordering compare_numeric(std::string_view a, std::string_view b) noexcept {
  auto strip = [](std::string_view s) {
    std::size_t i = 0;
    while (i + 1 < s.size() && s[i] == '0') ++i;
    return s.substr(i);
  };
  a = strip(a);
  b = strip(b);
  if (a.size() != b.size()) return a.size() <=> b.size();
  return a.compare(b) <=> 0;
}

std::strong_ordering compare_alpha(std::string_view a, std::string_view b) noexcept {
  const std::size_t n = std::min(a.size(), b.size());
  for (std::size_t i = 0; i < n; ++i) {
    const char x = lower(a[i]);
    const char y = lower(b[i]);
    if (x != y) return x <=> y;
  }
  return a.size() <=> b.size();
}

}  // namespace

std::strong_ordering compare_segments(std::string_view a, std::string_view b) noexcept {
  std::size_t i = 0;
  std::size_t j = 0;
  while (i < a.size() && j < b.size()) {
    const std::string_view ra = next_run(a, i);
    const std::string_view rb = next_run(b, j);
    const bool da = is_digit(ra.front());
    const bool db = is_digit(rb.front());
    if (da != db) return da ? std::strong_ordering::less : std::strong_ordering::greater;
    const auto c = da ? compare_numeric(ra, rb) : compare_alpha(ra, rb);
    if (c != 0) return c;
  }
  if (i < a.size()) return std::strong_ordering::greater;
  if (j < b.size()) return std::strong_ordering::less;
  return std::strong_ordering::equal;
}

Version Version::parse(std::string_view text) {
  if (text.empty()) throw Error(Errc::EmptyVersion, "empty version");
  Version v;
  std::size_t start = 0;
  for (std::size_t i = 0; i <= text.size(); ++i) {
    if (i == text.size() || text[i] == '.') {
      if (i == start) {
        throw Error(Errc::IllegalCharacter,
                    "empty version segment at position " + std::to_string(i) + " in '" +
                        std::string(text) + "'",
                    {std::to_string(i)});
      }
      v.segments_.emplace_back(text.substr(start, i - start));
      start = i + 1;
    } else if (!is_digit(text[i]) && !is_alpha(text[i])) {
      throw Error(Errc::IllegalCharacter,
                  "illegal character at position " + std::to_string(i) + " in version '" +
                      std::string(text) + "'",
                  {std::to_string(i)});
    }
  }
  v.text_ = std::string(text);
  return v;
}

std::strong_ordering compare(const Version& a, const Version& b) noexcept {
  const std::size_t n = std::min(a.segments_.size(), b.segments_.size());
  for (std::size_t i = 0; i < n; ++i) {
    const auto c = compare_segments(a.segments_[i], b.segments_[i]);
    if (c != 0) return c;
  }
  return a.segments_.size() <=> b.segments_.size();
}

bool is_valid_package_name(std::string_view name) noexcept {
  if (name.empty()) return false;
  auto lower_alnum = [](char c) { return (c >= 'a' && c <= 'z') || is_digit(c); };
  if (!lower_alnum(name.front())) return false;
  return std::all_of(name.begin() + 1, name.end(), [&](char c) {
    return lower_alnum(c) || c == '_' || c == '+' || c == '.' || c == '-';
  });
}

}  // namespace sds

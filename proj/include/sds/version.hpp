#pragma once

#include <compare>
#include <string>
#include <string_view>
#include <vector>

namespace sds {

/// A dotted version such as `3.4.2` or `1.0rc1`.
///
/// Each dot-separated segment is `[A-Za-z0-9]+`. Comparison splits every
/// segment into maximal digit and letter runs: digit runs compare
/// numerically, letter runs case-insensitively, and a digit run sorts
/// before a letter run at the same position. A strict prefix (of runs or
/// of segments) sorts first. Rendering returns the exact parsed text.
class Version {
 public:
  Version() = default;

  static Version parse(std::string_view text);

  const std::string& str() const noexcept { return text_; }
  const std::vector<std::string>& segments() const noexcept { return segments_; }
  bool empty() const noexcept { return segments_.empty(); }

  friend std::strong_ordering compare(const Version& a, const Version& b) noexcept;

  friend std::strong_ordering operator<=>(const Version& a, const Version& b) noexcept {
    return compare(a, b);
  }
  friend bool operator==(const Version& a, const Version& b) noexcept {
    return compare(a, b) == 0;
  }

 private:
  std::string text_;
  std::vector<std::string> segments_;
};

/// Segment-level comparison, exposed for tests.
std::strong_ordering compare_segments(std::string_view a, std::string_view b) noexcept;

inline std::strong_ordering compare_versions(const Version& a, const Version& b) noexcept {
  return compare(a, b);
}

/// True if `name` matches `[a-z0-9][a-z0-9_+.-]*`.
bool is_valid_package_name(std::string_view name) noexcept;

}  // namespace sds

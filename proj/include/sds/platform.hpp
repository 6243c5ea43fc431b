#pragma once

#include <string>
#include <string_view>

namespace sds {

/// `<os>-<arch>` or the wildcard `any`.
class Platform {
 public:
  Platform() : any_(true) {}

  static Platform parse(std::string_view text);
  static Platform any() { return Platform{}; }
  /// Host platform from uname(2), overridable through `SDS_PLATFORM`.
  static Platform host();

  bool is_any() const noexcept { return any_; }
  const std::string& os() const noexcept { return os_; }
  const std::string& arch() const noexcept { return arch_; }

  /// `any` matches everything; otherwise os and arch must agree.
  bool matches(const Platform& target) const noexcept;

  std::string str() const { return any_ ? "any" : os_ + "-" + arch_; }

  friend bool operator==(const Platform&, const Platform&) = default;

 private:
  bool any_ = false;
  std::string os_;
  std::string arch_;
};

}  // namespace sds

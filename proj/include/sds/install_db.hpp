#pragma once

#include <chrono>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "sds/depends.hpp"
#include "sds/platform.hpp"
#include "sds/version.hpp"

namespace sds {

namespace fs = std::filesystem;

using Clock = std::function<std::chrono::system_clock::time_point()>;

struct InstallRecord {
  std::string name;
  Version version;
  Platform platform;
  std::chrono::system_clock::time_point installed_at{};
  std::string origin;
  std::vector<std::pair<std::string, Version>> resolved_deps;
  /// Fields this build does not know about; written back unchanged.
  std::vector<std::pair<std::string, std::string>> extra_fields;

  friend bool operator==(const InstallRecord& a, const InstallRecord& b);
};

std::string format_timestamp(std::chrono::system_clock::time_point t);
std::chrono::system_clock::time_point parse_timestamp(std::string_view text);

std::string render_record(const InstallRecord& r);
/// `source` names the file in CorruptRecord errors.
InstallRecord parse_record(std::string_view text, const std::string& source);

enum class RegisterMode { fresh, replace };

struct Verdict {
  enum class Kind { satisfied, violating, absent };
  Kind kind = Kind::absent;
  std::optional<Version> installed;
};

/// Exclusive flock on `<prefix>/.sds/lock`. Non-blocking: LockHeld if taken.
class PrefixLock {
 public:
  explicit PrefixLock(const fs::path& lock_file);
  ~PrefixLock();
  PrefixLock(const PrefixLock&) = delete;
  PrefixLock& operator=(const PrefixLock&) = delete;

 private:
  int fd_ = -1;
};

/// The per-prefix registry under `<prefix>/.sds/db`, one file per package.
class InstallPrefix {
 public:
  /// Creates `.sds/db` and the lock file if needed. Idempotent.
  static InstallPrefix init(const fs::path& path);
  /// Opens an existing prefix without creating anything.
  static InstallPrefix open(const fs::path& path);

  const fs::path& path() const noexcept { return path_; }
  fs::path sds_dir() const { return path_ / ".sds"; }
  fs::path db_dir() const { return path_ / ".sds" / "db"; }
  fs::path lock_file() const { return path_ / ".sds" / "lock"; }
  fs::path log_dir() const { return path_ / ".sds" / "log"; }
  fs::path build_root() const { return path_ / ".sds" / "build"; }

  PrefixLock lock() const { return PrefixLock(lock_file()); }

  std::optional<InstallRecord> query(const std::string& name) const;
  std::vector<InstallRecord> list() const;
  /// Caller holds the prefix lock.
  void register_record(const InstallRecord& record, RegisterMode mode) const;
  Verdict satisfies(const DependencyClause& clause) const;

  /// Test seam: invoked after the temp file is written, before rename.
  std::function<void()> before_commit;

 private:
  explicit InstallPrefix(fs::path p) : path_(std::move(p)) {}
  fs::path path_;
};

}  // namespace sds

#pragma once

#include <filesystem>
#include <functional>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "sds/depends.hpp"
#include "sds/platform.hpp"
#include "sds/version.hpp"

namespace sds {

namespace fs = std::filesystem;

/// Pipeline stages, in execution order.
enum class Stage { extract, depends, configure, build, install, registration };
enum class Phase { pre, main, post };

inline constexpr Stage kStages[] = {Stage::extract,   Stage::depends, Stage::configure,
                                    Stage::build,     Stage::install, Stage::registration};

std::string_view stage_name(Stage s) noexcept;
std::string_view phase_name(Phase p) noexcept;

struct HookKind {
  Stage stage;
  Phase phase;

  /// `configure`, `pre-build`, `post-register`, ...
  std::string filename() const;
  /// Parses a conventional hook filename. `register` is not a hook name.
  static std::optional<HookKind> from_filename(std::string_view name);

  friend auto operator<=>(const HookKind&, const HookKind&) = default;
};

struct UpstreamRef {
  enum class Kind { none, embedded, url };
  Kind kind = Kind::none;
  std::string url;           // kind == url
  std::string archive_name;  // kind == embedded, file name inside pkg/
};

struct PackageManifest {
  std::string name;
  Version version;
  std::string license;
  std::vector<Platform> platforms;
  std::string maintainer;
  std::string description;
  UpstreamRef upstream;
  std::vector<DependencyClause> depends;
  std::set<HookKind> hooks;
  /// Non-fatal findings, e.g. a conventionally named file that is not executable.
  std::vector<std::string> warnings;

  bool has_hook(Stage s, Phase p) const { return hooks.count(HookKind{s, p}) != 0; }
  bool supports(const Platform& target) const;
  /// `<name>_<version>.spkg`
  std::string archive_filename() const;
};

/// Read-only view of a package tree, rooted at the package directory.
/// Lets the same validation run over a directory or an in-memory archive.
class PackageTree {
 public:
  virtual ~PackageTree() = default;
  virtual std::optional<std::string> read_file(const std::string& rel) const = 0;
  /// Regular-file and directory entries directly under `rel` ("" = root).
  struct Entry {
    std::string name;
    bool is_dir = false;
    bool executable = false;
  };
  virtual std::vector<Entry> list(const std::string& rel) const = 0;
};

PackageManifest parse_manifest(const PackageTree& tree);

/// Validates and reads a package directory.
PackageManifest load_package(const fs::path& root);

/// Validates and reads a packed `.spkg` held in memory, without extracting it.
PackageManifest load_package_archive(std::string_view archive_bytes);

/// Packs `root` into `<out>/<name>_<version>.spkg`, byte-deterministic.
fs::path pack(const fs::path& root, const fs::path& out_dir);

/// Extracts a `.spkg` under `dest` and returns the package root.
fs::path unpack(const fs::path& archive, const fs::path& dest);

bool is_archive_filename(std::string_view name) noexcept;

}  // namespace sds

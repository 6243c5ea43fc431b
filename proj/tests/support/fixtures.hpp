#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "sds/archive.hpp"
#include "sds/package.hpp"

namespace sds::testing {

namespace fs = std::filesystem;

class ScratchDir {
 public:
  ScratchDir();
  ~ScratchDir();
  ScratchDir(const ScratchDir&) = delete;
  ScratchDir& operator=(const ScratchDir&) = delete;
  const fs::path& path() const noexcept { return path_; }
  fs::path operator/(const std::string& rel) const { return path_ / rel; }

 private:
  fs::path path_;
};

void write_text(const fs::path& p, const std::string& text, bool executable = false);
std::string read_text(const fs::path& p);
std::string file_url(const fs::path& p);

/// Describes a package tree to materialize on disk.
struct PackageSpec {
  std::string name;
  std::string version = "1.0";
  std::string license = "GPL";
  std::vector<std::string> platforms{"any"};
  std::string maintainer = "tools@example.org";
  std::string description;
  std::string depends;                         // depends/depends contents; omitted when empty
  std::map<std::string, std::string> hooks;    // executable files at root
  std::map<std::string, std::string> files;    // other files, relative path -> contents
  std::string upstream_url;
  /// Embedded upstream: pkg/<archive name> built from these members.
  std::string embedded_name;
  std::vector<TarMember> embedded;
};

/// Writes the package directory and returns its root (`<parent>/<name>`).
fs::path write_package(const fs::path& parent, const PackageSpec& spec);

/// gcc-style package: identification, depends, hooks
/// configure/build/post-install logging to `$SDS_PREFIX/../journal`, and an
/// upstream.url pointing at `upstream_url`.
PackageSpec gcc_like_spec(const std::string& upstream_url);

/// Tarball of a GNU-style toy project: `configure` writes a Makefile whose
/// install target drops `bin/<tool>` and `share/<tool>/VERSION` under the prefix.
std::vector<TarMember> gnu_toy_members(const std::string& tool, const std::string& version);

/// Packs each spec into `repo_dir`, writes `repo_dir/Index`, returns its file URL.
std::string make_repo(const fs::path& repo_dir, const std::vector<PackageSpec>& specs,
                      const fs::path& work_dir);

/// Snapshot of every regular file under a root, relative path -> contents + mode.
std::map<std::string, std::string> snapshot_tree(const fs::path& root);

}  // namespace sds::testing

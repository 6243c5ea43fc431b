#pragma once

#include <chrono>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "sds/error.hpp"
#include "sds/install_db.hpp"
#include "sds/package.hpp"
#include "sds/process.hpp"
#include "sds/repo.hpp"

namespace sds {

struct StageReport {
  enum class Executor { builtin, hook };
  Stage stage;
  Phase phase;
  Executor executor = Executor::builtin;
  int exit_status = 0;
  fs::path log;
  std::chrono::milliseconds duration{0};
};

struct BuildContext {
  fs::path package_root;
  fs::path build_dir;
  const InstallPrefix* prefix = nullptr;
  Platform platform;
  Environment env;  // base environment; stage variables are layered on top
  fs::path download_cache;
  Transport* transport = nullptr;
  RegisterMode mode = RegisterMode::fresh;
  std::string origin;
  Clock clock;
  std::optional<std::chrono::milliseconds> hook_timeout;
};

/// Runs pre-hook, main hook or builtin default, post-hook for one stage.
/// Reports are appended to `reports` as each phase completes, so a caller
/// still sees the successful phases when a later one throws.
void run_stage(Stage stage, const PackageManifest& manifest, BuildContext& ctx,
               std::vector<StageReport>& reports);

struct InstallOptions {
  RegisterMode mode = RegisterMode::fresh;
  Platform platform = Platform::host();
  std::string origin;  // defaults to the package path
  fs::path cache_dir;  // defaults to default_cache_dir()
  Transport* transport = nullptr;  // defaults to DefaultTransport
  Clock clock;  // defaults to system_clock::now
  std::optional<std::chrono::milliseconds> hook_timeout;
};

struct InstallOutcome {
  PackageManifest manifest;
  std::vector<StageReport> reports;
};

/// Installs one package (archive or directory) into a prefix. On failure
/// throws and the database is left as it was; reports gathered so far are
/// available through InstallFailure.
InstallOutcome spkg_install(const fs::path& package, const fs::path& prefix,
                            const InstallOptions& opts = {});

/// Thrown by spkg_install when a stage fails; wraps the original error.
class InstallFailure : public Error {
 public:
  InstallFailure(const Error& cause, std::vector<StageReport> reports, fs::path build_dir)
      : Error(cause.code(), cause.what(), cause.details()),
        reports_(std::move(reports)),
        build_dir_(std::move(build_dir)) {}
  const std::vector<StageReport>& reports() const noexcept { return reports_; }
  const fs::path& build_dir() const noexcept { return build_dir_; }

 private:
  std::vector<StageReport> reports_;
  fs::path build_dir_;
};

}  // namespace sds

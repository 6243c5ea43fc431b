#pragma once

#include <chrono>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace sds {

namespace fs = std::filesystem;

using Environment = std::map<std::string, std::string>;

Environment current_environment();

struct ProcessResult {
  int exit_status = 0;  // 128 + signal for signalled children
  bool timed_out = false;
};

/// Runs argv[0] (resolved through env PATH when it has no slash) with
/// stdout and stderr appended to `log`. Scripts without a shebang run
/// under /bin/sh.
ProcessResult run_process(const std::vector<std::string>& argv, const Environment& env,
                          const fs::path& cwd, const fs::path& log,
                          std::optional<std::chrono::milliseconds> timeout = std::nullopt);

/// Looks `program` up in a colon-separated PATH.
std::optional<fs::path> find_in_path(const std::string& program, const std::string& path_var);

bool is_executable_file(const fs::path& p);

}  // namespace sds

#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "sds/error.hpp"

namespace sds::cli {

enum ExitCode : int {
  kOk = 0,
  kFailure = 1,
  kUsage = 2,
  kResolution = 3,
  kTransport = 4,
  kBuild = 5,
  kDatabase = 6,
};

int exit_code_for(Errc code) noexcept;

/// Entry points for the three executables; argv excludes the program name.
int sapt_main(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int spkg_main(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int sds_index_main(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace sds::cli

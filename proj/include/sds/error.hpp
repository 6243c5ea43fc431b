#pragma once

#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace sds {

enum class Errc {
  // versions, names, platforms
  EmptyVersion,
  IllegalCharacter,
  InvalidVersion,
  InvalidPlatform,
  InvalidName,
  // dependency language
  SyntaxError,
  DuplicateDependency,
  // package format
  MissingIdentificationFile,
  InvalidManifest,
  ForbiddenHook,
  AmbiguousUpstream,
  CorruptArchive,
  PathTraversal,
  MultipleTopLevelDirs,
  IoError,
  // install database
  PermissionDenied,
  NotADirectory,
  CorruptRecord,
  AlreadyRegistered,
  LockHeld,
  // resolution
  NoCandidate,
  PlatformMismatch,
  DependencyCycle,
  ConflictingConstraints,
  ReplaceRefused,
  // lifecycle
  HookFailed,
  DependsUnsatisfied,
  UpstreamFetchFailed,
  DefaultToolMissing,
  PlatformUnsupported,
  // repository
  TransportError,
  IndexParseError,
  ChecksumMismatch,
  SizeMismatch,
  NotFound,
};

std::string_view errc_name(Errc code) noexcept;

/// Every failure in the library surfaces as this exception. `details`
/// carries structured payload where the error has one (cycle members,
/// offending clauses, file names).
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& message, std::vector<std::string> details = {})
      : std::runtime_error(message), code_(code), details_(std::move(details)) {}

  Errc code() const noexcept { return code_; }
  const std::vector<std::string>& details() const noexcept { return details_; }

 private:
  Errc code_;
  std::vector<std::string> details_;
};

}  // namespace sds

#include "sds/error.hpp"

namespace sds {

std::string_view errc_name(Errc code) noexcept {
  switch (code) {
    case Errc::EmptyVersion: return "EmptyVersion";
    case Errc::IllegalCharacter: return "IllegalCharacter";
    case Errc::InvalidVersion: return "InvalidVersion";
    case Errc::InvalidPlatform: return "InvalidPlatform";
    case Errc::InvalidName: return "InvalidName";
    case Errc::SyntaxError: return "SyntaxError";
    case Errc::DuplicateDependency: return "DuplicateDependency";
    case Errc::MissingIdentificationFile: return "MissingIdentificationFile";
    case Errc::InvalidManifest: return "InvalidManifest";
    case Errc::ForbiddenHook: return "ForbiddenHook";
    case Errc::AmbiguousUpstream: return "AmbiguousUpstream";
    case Errc::CorruptArchive: return "CorruptArchive";
    case Errc::PathTraversal: return "PathTraversal";
    case Errc::MultipleTopLevelDirs: return "MultipleTopLevelDirs";
    case Errc::IoError: return "IoError";
    case Errc::PermissionDenied: return "PermissionDenied";
    case Errc::NotADirectory: return "NotADirectory";
    case Errc::CorruptRecord: return "CorruptRecord";
    case Errc::AlreadyRegistered: return "AlreadyRegistered";
    case Errc::LockHeld: return "LockHeld";
    case Errc::NoCandidate: return "NoCandidate";
    case Errc::PlatformMismatch: return "PlatformMismatch";
    case Errc::DependencyCycle: return "DependencyCycle";
    case Errc::ConflictingConstraints: return "ConflictingConstraints";
    case Errc::ReplaceRefused: return "ReplaceRefused";
    case Errc::HookFailed: return "HookFailed";
    case Errc::DependsUnsatisfied: return "DependsUnsatisfied";
    case Errc::UpstreamFetchFailed: return "UpstreamFetchFailed";
    case Errc::DefaultToolMissing: return "DefaultToolMissing";
    case Errc::PlatformUnsupported: return "PlatformUnsupported";
    case Errc::TransportError: return "TransportError";
    case Errc::IndexParseError: return "IndexParseError";
    case Errc::ChecksumMismatch: return "ChecksumMismatch";
    case Errc::SizeMismatch: return "SizeMismatch";
    case Errc::NotFound: return "NotFound";
  }
  return "Unknown";
}

}  // namespace sds

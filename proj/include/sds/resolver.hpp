#pragma once

#include <optional>
#include <string>
#include <vector>

#include "sds/depends.hpp"
#include "sds/install_db.hpp"
#include "sds/platform.hpp"
#include "sds/repo.hpp"

namespace sds {

struct Candidate {
  const IndexEntry* entry = nullptr;
  std::string source;  // repository base URL
};

/// Highest version satisfying every clause and the platform. Repository
/// order breaks ties. NoCandidate / PlatformMismatch otherwise.
Candidate select_version(const std::string& name, const std::vector<DependencyClause>& clauses,
                         const std::vector<RepositoryIndex>& indexes, const Platform& platform);

struct PlanAction {
  enum class Kind { install, replace, skip };
  Kind kind = Kind::install;
  std::string name;
  Version version;
  std::string source;  // base URL, or "local" for skips
  std::string reason;
  /// Entry the action installs; null for skips.
  const IndexEntry* entry = nullptr;
};

std::string_view action_name(PlanAction::Kind k) noexcept;

struct ResolutionPlan {
  std::vector<PlanAction> actions;

  /// `ACTION name version source (reason)`, one per line.
  std::string serialize() const;
};

/// Installed state as seen by the resolver, name -> version.
using DbSnapshot = std::vector<InstallRecord>;

struct ResolveOptions {
  bool allow_replace = true;
};

/// Recursive expansion to a fixpoint, then a topological sort with
/// dependencies first and ties broken by name. Entries referenced by the
/// plan point into `indexes`, which must outlive it.
ResolutionPlan resolve(const std::vector<DependencyClause>& requests, const DbSnapshot& db,
                       const std::vector<RepositoryIndex>& indexes, const Platform& platform,
                       ResolveOptions opts = {});

}  // namespace sds

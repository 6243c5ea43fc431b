#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "sds/version.hpp"

namespace sds {

enum class ConstraintOp { any, eq, ge, le, gt, lt };

std::string_view op_symbol(ConstraintOp op) noexcept;

/// One dependency rule line: a package name with an optional version bound.
struct DependencyClause {
  std::string name;
  ConstraintOp op = ConstraintOp::any;
  Version version;  // empty iff op == any

  bool accepts(const Version& v) const noexcept;

  friend bool operator==(const DependencyClause& a, const DependencyClause& b) noexcept {
    return a.name == b.name && a.op == b.op && a.version.str() == b.version.str();
  }
};

/// Parses a `depends/depends` file. One clause per line, `name` or
/// `name (OP version)`, `#` comments, blank lines ignored. Order is kept;
/// duplicate names are rejected.
std::vector<DependencyClause> parse_depends(std::string_view text);

/// Parses a single clause; the line number is only used for diagnostics.
DependencyClause parse_clause(std::string_view text, std::size_t line = 1);

/// Parses the comma-separated form used by the repository index.
std::vector<DependencyClause> parse_depends_list(std::string_view text);

/// Parses a command-line spec: `name`, `name=1.2`, `name>=1.2`, ...
DependencyClause parse_request(std::string_view text);

bool clause_satisfied(const DependencyClause& clause, std::string_view name, const Version& version) noexcept;

std::string render_clause(const DependencyClause& clause);
std::string render_depends(const std::vector<DependencyClause>& clauses);        // one per line
std::string render_depends_list(const std::vector<DependencyClause>& clauses);   // comma-separated

}  // namespace sds

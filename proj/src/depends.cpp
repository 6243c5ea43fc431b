#include "sds/depends.hpp"

#include <set>

#include "sds/error.hpp"

namespace sds {

namespace {

bool name_char(char c) noexcept {
  return (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') || c == '_' || c == '+' || c == '.' ||
         c == '-';
}

bool version_char(char c) noexcept {
  return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '.';
}

bool space(char c) noexcept { return c == ' ' || c == '\t' || c == '\r'; }

class LineParser {
 public:
  LineParser(std::string_view text, std::size_t line) : s_(text), line_(line) {}

  DependencyClause parse() {
    DependencyClause c;
    skip_space();
    const std::size_t name_start = pos_;
    if (at_end() || !name_char(peek()) || peek() == '_' || peek() == '+' || peek() == '.' ||
        peek() == '-') {
      fail("expected package name");
    }
    while (!at_end() && name_char(peek())) ++pos_;
    c.name = std::string(s_.substr(name_start, pos_ - name_start));
    skip_space();
    if (!at_end() && peek() == '(') {
      ++pos_;
      skip_space();
      c.op = parse_op();
      skip_space();
      const std::size_t vstart = pos_;
      while (!at_end() && version_char(peek())) ++pos_;
      if (pos_ == vstart) fail("expected version");
      const auto vtext = s_.substr(vstart, pos_ - vstart);
      try {
        c.version = Version::parse(vtext);
      } catch (const Error& e) {
        throw Error(Errc::InvalidVersion, where(vstart) + ": invalid version '" + std::string(vtext) +
                                              "': " + e.what());
      }
      skip_space();
      if (at_end() || peek() != ')') fail("expected ')'");
      ++pos_;
      skip_space();
    }
    if (!at_end()) fail("unexpected character '" + std::string(1, peek()) + "'");
    return c;
  }

 private:
  ConstraintOp parse_op() {
    auto two = s_.substr(pos_, 2);
    if (two == ">=") { pos_ += 2; return ConstraintOp::ge; }
    if (two == "<=") { pos_ += 2; return ConstraintOp::le; }
    if (at_end()) fail("expected operator");
    switch (peek()) {
      case '=': ++pos_; return ConstraintOp::eq;
      case '>': ++pos_; return ConstraintOp::gt;
      case '<': ++pos_; return ConstraintOp::lt;
      default: fail("expected one of =, >=, <=, >, <");
    }
    return ConstraintOp::any;
  }

  std::string where(std::size_t col) const {
    return "line " + std::to_string(line_) + ", column " + std::to_string(col + 1);
  }

  [[noreturn]] void fail(const std::string& what) const {
    throw Error(Errc::SyntaxError, where(pos_) + ": " + what,
                {std::to_string(line_), std::to_string(pos_ + 1)});
  }

  bool at_end() const noexcept { return pos_ >= s_.size(); }
  char peek() const noexcept { return s_[pos_]; }
  void skip_space() noexcept {
    while (!at_end() && space(peek())) ++pos_;
  }

  std::string_view s_;
  std::size_t line_;
  std::size_t pos_ = 0;
};

void reject_duplicates(const std::vector<DependencyClause>& clauses) {
  std::set<std::string> seen;
  for (const auto& c : clauses) {
    if (!seen.insert(c.name).second) {
      throw Error(Errc::DuplicateDependency, "duplicate dependency on '" + c.name + "'", {c.name});
    }
  }
}

}  // namespace

std::string_view op_symbol(ConstraintOp op) noexcept {
  switch (op) {
    case ConstraintOp::any: return "";
    case ConstraintOp::eq: return "=";
    case ConstraintOp::ge: return ">=";
    case ConstraintOp::le: return "<=";
    case ConstraintOp::gt: return ">";
    case ConstraintOp::lt: return "<";
  }
  return "";
}

bool DependencyClause::accepts(const Version& v) const noexcept {
  if (op == ConstraintOp::any) return true;
  const auto c = compare_versions(v, version);
  switch (op) {
    case ConstraintOp::eq: return c == 0;
    case ConstraintOp::ge: return c >= 0;
    case ConstraintOp::le: return c <= 0;
    case ConstraintOp::gt: return c > 0;
    case ConstraintOp::lt: return c < 0;
    case ConstraintOp::any: break;
  }
  return true;
}

DependencyClause parse_clause(std::string_view text, std::size_t line) {
  return LineParser(text, line).parse();
}

std::vector<DependencyClause> parse_depends(std::string_view text) {
  std::vector<DependencyClause> out;
  std::size_t line_no = 0;
  std::size_t start = 0;
  while (start <= text.size()) {
    auto end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    ++line_no;
    auto line = text.substr(start, end - start);
    if (auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    bool blank = true;
    for (char c : line) blank = blank && space(c);
    if (!blank) out.push_back(parse_clause(line, line_no));
    if (end == text.size()) break;
    start = end + 1;
  }
  reject_duplicates(out);
  return out;
}

std::vector<DependencyClause> parse_depends_list(std::string_view text) {
  std::vector<DependencyClause> out;
  bool blank = true;
  for (char c : text) blank = blank && space(c);
  if (blank) return out;
  std::size_t start = 0;
  while (true) {
    auto end = text.find(',', start);
    if (end == std::string_view::npos) end = text.size();
    out.push_back(parse_clause(text.substr(start, end - start), 1));
    if (end == text.size()) break;
    start = end + 1;
  }
  reject_duplicates(out);
  return out;
}

DependencyClause parse_request(std::string_view text) {
  if (text.find('(') != std::string_view::npos) return parse_clause(text);
  const auto op_pos = text.find_first_of("=<>");
  if (op_pos == std::string_view::npos) return parse_clause(text);
  const auto name = text.substr(0, op_pos);
  auto rest = text.substr(op_pos);
  std::size_t op_len = (rest.size() > 1 && rest[1] == '=') ? 2 : 1;
  return parse_clause(std::string(name) + " (" + std::string(rest.substr(0, op_len)) + " " +
                      std::string(rest.substr(op_len)) + ")");
}

bool clause_satisfied(const DependencyClause& clause, std::string_view name,
                      const Version& version) noexcept {
  return clause.name == name && clause.accepts(version);
}

std::string render_clause(const DependencyClause& c) {
  if (c.op == ConstraintOp::any) return c.name;
  return c.name + " (" + std::string(op_symbol(c.op)) + " " + c.version.str() + ")";
}

std::string render_depends(const std::vector<DependencyClause>& clauses) {
  std::string out;
  for (const auto& c : clauses) out += render_clause(c) + "\n";
  return out;
}

std::string render_depends_list(const std::vector<DependencyClause>& clauses) {
  std::string out;
  for (const auto& c : clauses) {
    if (!out.empty()) out += ", ";
    out += render_clause(c);
  }
  return out;
}

}  // namespace sds

#include "resolver_oracle.hpp"

#include <algorithm>
#include <map>
#include <set>

#include "reference.hpp"

namespace sds::testing {

namespace {

struct Edge {
  std::string name;
  std::string op;  // "", "=", ">=", "<=", ">", "<"
  std::string bound;
};

// Oracle acceptance on raw strings via the reference comparator.
bool accepts(const Edge& e, const std::string& v) {
  if (e.op.empty()) return true;
  const auto c = ref::compare(v, e.bound);
  if (e.op == "=") return c == 0;
  if (e.op == ">=") return c >= 0;
  if (e.op == "<=") return c <= 0;
  if (e.op == ">") return c > 0;
  return c < 0;
}

Edge to_edge(const DependencyClause& c) {
  return Edge{c.name, c.op == ConstraintOp::any ? "" : std::string(op_symbol(c.op)), c.version.str()};
}

// Per package: list of version strings and the dependency edges (shared by all versions).
struct Model {
  std::map<std::string, std::vector<std::string>> versions;
  std::map<std::string, std::vector<Edge>> deps;
  std::map<std::string, std::string> installed;
};

Model model_of(const Universe& u) {
  Model m;
  for (const auto& idx : u.indexes) {
    for (const auto& e : idx.entries) {
      m.versions[e.name].push_back(e.version.str());
      auto& d = m.deps[e.name];
      d.clear();
      for (const auto& c : e.depends) d.push_back(to_edge(c));
    }
  }
  for (const auto& r : u.db) m.installed[r.name] = r.version.str();
  return m;
}

std::string max_accepted(const std::vector<std::string>& versions, const std::vector<Edge>& in) {
  std::string best;
  bool found = false;
  for (const auto& v : versions) {
    if (!std::all_of(in.begin(), in.end(), [&](const Edge& e) { return accepts(e, v); })) continue;
    if (!found || ref::compare(v, best) > 0) best = v, found = true;
  }
  return found ? best : "<none>";
}

Edge random_edge(std::mt19937_64& rng, const std::string& name, const std::vector<std::string>& versions,
                 const std::string& witness) {
  static const char* const ops[] = {"", "=", ">=", "<=", ">", "<"};
  for (int attempt = 0; attempt < 8; ++attempt) {
    const std::string op = ops[rng() % 6];
    if (op.empty()) return Edge{name, "", ""};
    const auto& bound = versions[rng() % versions.size()];
    Edge e{name, op, bound};
    if (accepts(e, witness)) return e;
  }
  return Edge{name, ">=", witness};
}

DependencyClause to_clause(const Edge& e) {
  return e.op.empty() ? parse_request(e.name) : parse_request(e.name + e.op + e.bound);
}

}  // namespace

Universe random_universe(std::mt19937_64& rng, bool with_db) {
  const int n = 1 + static_cast<int>(rng() % 12);
  std::vector<std::string> names;
  for (int i = 0; i < n; ++i) names.push_back("p" + std::to_string(i));
  std::vector<std::vector<std::string>> versions(n);
  std::vector<std::string> witness(n);
  for (int i = 0; i < n; ++i) {
    const int k = 1 + static_cast<int>(rng() % 3);
    while (static_cast<int>(versions[i].size()) < k) {
      const auto v = ref::random_version(rng);
      const bool dup = std::any_of(versions[i].begin(), versions[i].end(),
                                   [&](const std::string& x) { return ref::compare(x, v) == 0; });
      if (!dup) versions[i].push_back(v);
    }
    witness[i] = versions[i][rng() % versions[i].size()];
  }
  // Edges only point to higher indexes, so the graph is acyclic.
  std::vector<std::vector<Edge>> deps(n);
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      if (rng() % 3 == 0) deps[i].push_back(random_edge(rng, names[j], versions[j], witness[j]));
    }
  }
  Universe u;
  const int repos = 1 + static_cast<int>(rng() % 2);
  for (int r = 0; r < repos; ++r) u.indexes.push_back(RepositoryIndex{"file:///repo" + std::to_string(r), {}});
  for (int i = 0; i < n; ++i) {
    for (const auto& v : versions[i]) {
      IndexEntry e;
      e.name = names[i];
      e.version = Version::parse(v);
      e.platforms = {Platform::any()};
      e.filename = names[i] + "_" + v + ".spkg";
      e.sha256 = std::string(64, '0');
      for (const auto& d : deps[i]) e.depends.push_back(to_clause(d));
      u.indexes[rng() % repos].entries.push_back(std::move(e));
    }
  }
  for (auto& idx : u.indexes) {
    std::sort(idx.entries.begin(), idx.entries.end(), [](const IndexEntry& a, const IndexEntry& b) {
      return a.name != b.name ? a.name < b.name : compare_versions(a.version, b.version) < 0;
    });
  }
  u.requests.push_back(to_clause(random_edge(rng, names[0], versions[0], witness[0])));
  for (int i = 1; i < n; ++i) {
    if (rng() % 5 == 0) u.requests.push_back(to_clause(random_edge(rng, names[i], versions[i], witness[i])));
  }
  if (with_db) {
    for (int i = 0; i < n; ++i) {
      if (rng() % 2) continue;
      InstallRecord r;
      r.name = names[i];
      r.version = Version::parse(rng() % 3 ? versions[i][rng() % versions[i].size()] : ref::random_version(rng));
      r.platform = Platform::any();
      u.db.push_back(std::move(r));
    }
  }
  return u;
}

std::string check_exact(const Universe& u, const ResolutionPlan& plan) {
  const auto m = model_of(u);
  std::map<std::string, std::vector<Edge>> in;
  std::vector<std::string> queue;
  std::set<std::string> seen;
  for (const auto& r : u.requests) {
    in[r.name].push_back(to_edge(r));
    if (seen.insert(r.name).second) queue.push_back(r.name);
  }
  for (std::size_t i = 0; i < queue.size(); ++i) {
    for (const auto& e : m.deps.at(queue[i])) {
      in[e.name].push_back(e);
      if (seen.insert(e.name).second) queue.push_back(e.name);
    }
  }
  std::map<std::string, std::string> expected;
  for (const auto& [name, edges] : in) expected[name] = max_accepted(m.versions.at(name), edges);
  std::map<std::string, std::string> got;
  for (const auto& a : plan.actions) {
    if (a.kind != PlanAction::Kind::install) return "unexpected " + std::string(action_name(a.kind)) + " " + a.name;
    got[a.name] = a.version.str();
  }
  if (got != expected) {
    std::string msg = "expected:";
    for (const auto& [n, v] : expected) msg += " " + n + "=" + v;
    msg += " got:";
    for (const auto& [n, v] : got) msg += " " + n + "=" + v;
    return msg;
  }
  return check_sound(u, plan);
}

std::string check_sound(const Universe& u, const ResolutionPlan& plan) {
  const auto m = model_of(u);
  std::map<std::string, std::string> state = m.installed;
  std::map<std::string, std::size_t> position;
  for (std::size_t i = 0; i < plan.actions.size(); ++i) {
    const auto& a = plan.actions[i];
    if (!position.emplace(a.name, i).second) return "duplicate action for " + a.name;
  }
  // Clauses the planned members impose on each name.
  std::map<std::string, std::vector<Edge>> in;
  for (const auto& r : u.requests) in[r.name].push_back(to_edge(r));
  for (const auto& a : plan.actions) {
    if (a.kind == PlanAction::Kind::skip) continue;
    for (const auto& e : m.deps.at(a.name)) in[e.name].push_back(e);
  }
  for (const auto& [name, edges] : in) {
    if (!position.count(name)) return "required package missing from plan: " + name;
  }
  for (const auto& a : plan.actions) {
    const auto& edges = in[a.name];
    if (edges.empty()) return "plan contains unreferenced package " + a.name;
    const auto inst = m.installed.find(a.name);
    const bool installed_ok = inst != m.installed.end() &&
                              std::all_of(edges.begin(), edges.end(),
                                          [&](const Edge& e) { return accepts(e, inst->second); });
    switch (a.kind) {
      case PlanAction::Kind::skip:
        if (!installed_ok || a.version.str() != inst->second) return "bad skip for " + a.name;
        break;
      case PlanAction::Kind::install:
      case PlanAction::Kind::replace: {
        if (installed_ok) return "needless " + std::string(action_name(a.kind)) + " of " + a.name;
        if ((a.kind == PlanAction::Kind::replace) != (inst != m.installed.end())) {
          return "wrong action kind for " + a.name;
        }
        const auto want = max_accepted(m.versions.at(a.name), edges);
        if (a.version.str() != want) return a.name + " selected " + a.version.str() + ", expected " + want;
        for (const auto& e : m.deps.at(a.name)) {
          const auto it = position.find(e.name);
          if (it == position.end() || it->second > position.at(a.name)) {
            return a.name + " scheduled before its dependency " + e.name;
          }
        }
        state[a.name] = a.version.str();
        break;
      }
    }
  }
  // Final state satisfies everything the plan touched.
  for (const auto& [name, edges] : in) {
    for (const auto& e : edges) {
      if (!accepts(e, state.at(name))) return "final state violates a clause on " + name;
    }
  }
  return {};
}

}  // namespace sds::testing

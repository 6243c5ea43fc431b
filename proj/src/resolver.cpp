#include "sds/resolver.hpp"

#include <algorithm>
#include <deque>
#include <map>
#include <set>

#include "sds/error.hpp"

namespace sds {

namespace {

struct Need {
  std::vector<DependencyClause> clauses;
  std::vector<std::string> reasons;  // parallel to clauses
};

struct Decision {
  PlanAction::Kind kind = PlanAction::Kind::install;
  Version version;
  std::string source;
  const IndexEntry* entry = nullptr;

  bool same_as(const Decision& o) const {
    return kind == o.kind && entry == o.entry && version.str() == o.version.str() && source == o.source;
  }
};

std::string describe(const Need& need) {
  std::string out;
  for (std::size_t i = 0; i < need.clauses.size(); ++i) {
    if (!out.empty()) out += "; ";
    out += need.reasons[i];
  }
  return out;
}

std::vector<std::string> clause_list(const Need& need) { return need.reasons; }

bool has_any_entry(const std::string& name, const std::vector<RepositoryIndex>& indexes) {
  for (const auto& idx : indexes) {
    for (const auto& e : idx.entries) {
      if (e.name == name) return true;
    }
  }
  return false;
}

class Resolver {
 public:
  Resolver(const std::vector<DependencyClause>& requests, const DbSnapshot& db,
           const std::vector<RepositoryIndex>& indexes, const Platform& platform, ResolveOptions opts)
      : requests_(requests), indexes_(indexes), platform_(platform), opts_(opts) {
    for (const auto& r : db) db_.emplace(r.name, r.version);
    std::size_t total = 0;
    for (const auto& idx : indexes) total += idx.entries.size();
    max_rounds_ = total + requests.size() + 16;
  }

  ResolutionPlan run() {
    if (requests_.empty()) throw Error(Errc::NoCandidate, "nothing requested");
    std::map<std::string, Decision> selection;
    std::map<std::string, Need> needs;
    for (std::size_t round = 0;; ++round) {
      if (round > max_rounds_) {
        throw Error(Errc::ConflictingConstraints, "version selection does not converge");
      }
      needs = collect(selection);
      std::map<std::string, Decision> next;
      for (const auto& [name, need] : needs) next.emplace(name, decide(name, need));
      const bool stable = next.size() == selection.size() &&
                          std::equal(next.begin(), next.end(), selection.begin(), [](const auto& a, const auto& b) {
                            return a.first == b.first && a.second.same_as(b.second);
                          });
      selection = std::move(next);
      if (stable) break;
    }
    if (!opts_.allow_replace) {
      for (const auto& [name, d] : selection) {
        if (d.kind == PlanAction::Kind::replace) {
          throw Error(Errc::ReplaceRefused,
                      name + " " + db_.at(name).str() + " is installed but " + describe(needs.at(name)) +
                          "; replacing it was not allowed",
                      {name});
        }
      }
    }
    return order(selection, needs);
  }

 private:
  std::map<std::string, Need> collect(const std::map<std::string, Decision>& selection) const {
    std::map<std::string, Need> needs;
    std::deque<std::string> queue;
    std::set<std::string> seen;
    auto add = [&](const DependencyClause& c, std::string reason) {
      auto& n = needs[c.name];
      n.clauses.push_back(c);
      n.reasons.push_back(std::move(reason));
      if (seen.insert(c.name).second) queue.push_back(c.name);
    };
    for (const auto& r : requests_) add(r, "requested " + render_clause(r));
    while (!queue.empty()) {
      const auto name = queue.front();
      queue.pop_front();
      auto it = selection.find(name);
      if (it == selection.end() || !it->second.entry) continue;
      for (const auto& dep : it->second.entry->depends) add(dep, name + " requires " + render_clause(dep));
    }
    return needs;
  }

  Decision decide(const std::string& name, const Need& need) const {
    const auto installed = db_.find(name);
    if (installed != db_.end()) {
      const bool ok = std::all_of(need.clauses.begin(), need.clauses.end(),
                                  [&](const DependencyClause& c) { return c.accepts(installed->second); });
      if (ok) return Decision{PlanAction::Kind::skip, installed->second, "local", nullptr};
    }
    Candidate cand;
    try {
      cand = select_version(name, need.clauses, indexes_, platform_);
    } catch (const Error& e) {
      if (e.code() == Errc::NoCandidate && need.clauses.size() > 1 && has_any_entry(name, indexes_)) {
        bool each_ok = true;
        for (const auto& c : need.clauses) {
          try {
            select_version(name, {c}, indexes_, platform_);
          } catch (const Error&) {
            each_ok = false;
          }
        }
        if (each_ok) {
          throw Error(Errc::ConflictingConstraints,
                      "no single version of " + name + " satisfies: " + describe(need), clause_list(need));
        }
      }
      throw Error(e.code(), std::string(e.what()) + " (" + describe(need) + ")", e.details());
    }
    const auto kind = installed != db_.end() ? PlanAction::Kind::replace : PlanAction::Kind::install;
    return Decision{kind, cand.entry->version, cand.source, cand.entry};
  }

  ResolutionPlan order(const std::map<std::string, Decision>& selection,
                       const std::map<std::string, Need>& needs) const {
    // deps_of[x] = names x must come after
    std::map<std::string, std::set<std::string>> deps_of;
    std::map<std::string, std::set<std::string>> dependents;
    std::map<std::string, std::size_t> pending;
    for (const auto& [name, d] : selection) {
      auto& ds = deps_of[name];
      if (d.entry) {
        for (const auto& dep : d.entry->depends) ds.insert(dep.name);
      }
      pending[name] = ds.size();
      for (const auto& dep : ds) dependents[dep].insert(name);
    }
    std::set<std::string> ready;
    for (const auto& [name, n] : pending) {
      if (n == 0) ready.insert(name);
    }
    ResolutionPlan plan;
    while (!ready.empty()) {
      const auto name = *ready.begin();
      ready.erase(ready.begin());
      const auto& d = selection.at(name);
      plan.actions.push_back(
          PlanAction{d.kind, name, d.version, d.source, needs.at(name).reasons.front(), d.entry});
      for (const auto& dependent : dependents[name]) {
        if (--pending[dependent] == 0) ready.insert(dependent);
      }
    }
    if (plan.actions.size() != selection.size()) throw_cycle(deps_of, pending);
    return plan;
  }

  [[noreturn]] static void throw_cycle(const std::map<std::string, std::set<std::string>>& deps_of,
                                       const std::map<std::string, std::size_t>& pending) {
    // Walk unresolved dependency edges from the smallest stuck name until a node repeats.
    std::string start;
    for (const auto& [name, n] : pending) {
      if (n > 0) {
        start = name;
        break;
      }
    }
    std::vector<std::string> path;
    std::map<std::string, std::size_t> pos;
    std::string cur = start;
    while (!pos.count(cur)) {
      pos[cur] = path.size();
      path.push_back(cur);
      std::string next;
      for (const auto& dep : deps_of.at(cur)) {
        if (pending.at(dep) > 0) {
          next = dep;
          break;
        }
      }
      cur = next;
    }
    std::vector<std::string> cycle(path.begin() + static_cast<std::ptrdiff_t>(pos[cur]), path.end());
    std::string text;
    for (const auto& n : cycle) text += (text.empty() ? "" : " -> ") + n;
    throw Error(Errc::DependencyCycle, "dependency cycle: " + text + " -> " + cycle.front(), cycle);
  }

  const std::vector<DependencyClause>& requests_;
  const std::vector<RepositoryIndex>& indexes_;
  Platform platform_;
  ResolveOptions opts_;
  std::map<std::string, Version> db_;
  std::size_t max_rounds_ = 0;
};

}  // namespace

std::string_view action_name(PlanAction::Kind k) noexcept {
  switch (k) {
    case PlanAction::Kind::install: return "install";
    case PlanAction::Kind::replace: return "replace";
    case PlanAction::Kind::skip: return "skip";
  }
  return "";
}

std::string ResolutionPlan::serialize() const {
  std::string out;
  for (const auto& a : actions) {
    out += std::string(action_name(a.kind)) + " " + a.name + " " + a.version.str() + " " + a.source + " (" +
           a.reason + ")\n";
  }
  return out;
}

Candidate select_version(const std::string& name, const std::vector<DependencyClause>& clauses,
                         const std::vector<RepositoryIndex>& indexes, const Platform& platform) {
  bool known = false;
  bool satisfiable = false;
  Candidate best;
  for (const auto& idx : indexes) {
    for (const auto& e : idx.entries) {
      if (e.name != name) continue;
      known = true;
      const bool ok = std::all_of(clauses.begin(), clauses.end(),
                                  [&](const DependencyClause& c) { return c.accepts(e.version); });
      if (!ok) continue;
      satisfiable = true;
      if (!e.supports(platform)) continue;
      if (!best.entry || compare_versions(e.version, best.entry->version) > 0) {
        best = Candidate{&e, idx.base_url};
      }
    }
  }
  if (!known) throw Error(Errc::NoCandidate, "no package named " + name + " in any repository", {name});
  if (!satisfiable) throw Error(Errc::NoCandidate, "no version of " + name + " satisfies the constraints", {name});
  if (!best.entry) {
    throw Error(Errc::PlatformMismatch, "no version of " + name + " is available for " + platform.str(), {name});
  }
  return best;
}

ResolutionPlan resolve(const std::vector<DependencyClause>& requests, const DbSnapshot& db,
                       const std::vector<RepositoryIndex>& indexes, const Platform& platform,
                       ResolveOptions opts) {
  return Resolver(requests, db, indexes, platform, opts).run();
}

}  // namespace sds

#include "sds/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <map>
#include <ostream>
#include <set>

#include "sds/archive.hpp"
#include "sds/install_db.hpp"
#include "sds/lifecycle.hpp"
#include "sds/package.hpp"
#include "sds/repo.hpp"
#include "sds/resolver.hpp"

namespace sds::cli {

namespace {

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

void report_error(std::ostream& err, const Error& e) {
  err << "error: " << errc_name(e.code()) << ": " << e.what() << "\n";
}

// CLI11 wants the arguments reversed.
int parse_args(CLI::App& app, const std::vector<std::string>& args, std::ostream& out, std::ostream& err,
               bool& done) {
  std::vector<std::string> rev(args.rbegin(), args.rend());
  done = false;
  try {
    app.parse(rev);
  } catch (const CLI::ParseError& e) {
    done = true;
    const int rc = app.exit(e, out, err);
    return rc == 0 ? kOk : kUsage;
  }
  return kOk;
}

std::vector<std::string> load_sources(const std::string& sources_file) {
  const fs::path path = sources_file.empty() ? default_sources_path() : fs::path(sources_file);
  std::error_code ec;
  if (!fs::is_regular_file(path, ec)) {
    throw UsageError("no repository sources configured (" + path.string() + " not found)");
  }
  auto urls = parse_sources(read_file_bytes(path));
  if (urls.empty()) throw UsageError("no repository sources configured in " + path.string());
  return urls;
}

std::vector<RepositoryIndex> load_indexes(Transport& t, const std::vector<std::string>& urls) {
  std::vector<RepositoryIndex> out;
  out.reserve(urls.size());
  for (const auto& u : urls) out.push_back(fetch_index(t, u));
  return out;
}

Platform pick_platform(const std::string& text) { return text.empty() ? Platform::host() : Platform::parse(text); }

struct Common {
  std::string sources;
  std::string cache;
  std::string platform;
};

void add_common(CLI::App& app, Common& c) {
  app.add_option("--sources", c.sources, "Repository list file (default: $SDS_SOURCES or ~/.sds/sources)");
  app.add_option("--cache", c.cache, "Download cache (default: $SDS_CACHE or ~/.sds/cache)");
  app.add_option("--platform", c.platform, "Target platform <os>-<arch> (default: host)");
}

int do_install(const Common& common, const std::vector<std::string>& specs, const std::string& prefix_arg,
               bool dry_run, bool no_replace, std::ostream& out, std::ostream& err) {
  std::vector<DependencyClause> requests;
  for (const auto& s : specs) {
    try {
      requests.push_back(parse_request(s));
    } catch (const Error& e) {
      throw UsageError("bad package spec '" + s + "': " + e.what());
    }
  }
  const auto platform = pick_platform(common.platform);
  const auto urls = load_sources(common.sources);
  DefaultTransport transport;
  const auto indexes = load_indexes(transport, urls);

  const auto prefix = InstallPrefix::open(prefix_arg);
  const auto plan = resolve(requests, prefix.list(), indexes, platform, ResolveOptions{!no_replace});
  if (dry_run) {
    out << plan.serialize();
    return kOk;
  }

  const fs::path cache = common.cache.empty() ? default_cache_dir() : fs::path(common.cache);
  std::map<std::string, fs::path> archives;
  for (const auto& a : plan.actions) {
    if (a.kind == PlanAction::Kind::skip) continue;
    archives[a.name] = fetch_package(transport, *a.entry, a.source, cache);
  }

  std::size_t i = 0;
  try {
    for (; i < plan.actions.size(); ++i) {
      const auto& a = plan.actions[i];
      out << action_name(a.kind) << " " << a.name << " " << a.version.str() << "\n";
      if (a.kind == PlanAction::Kind::skip) continue;
      InstallOptions opts;
      opts.mode = a.kind == PlanAction::Kind::replace ? RegisterMode::replace : RegisterMode::fresh;
      opts.platform = platform;
      opts.origin = a.source;
      opts.cache_dir = cache;
      opts.transport = &transport;
      spkg_install(archives.at(a.name), prefix.path(), opts);
    }
  } catch (const Error&) {
    err << "completed:";
    for (std::size_t k = 0; k < i; ++k) err << " " << plan.actions[k].name;
    err << "\nfailed: " << plan.actions[i].name << "\nnot attempted:";
    for (std::size_t k = i + 1; k < plan.actions.size(); ++k) err << " " << plan.actions[k].name;
    err << "\n";
    throw;
  }
  return kOk;
}

int do_search(const Common& common, const std::string& pattern, std::ostream& out) {
  DefaultTransport transport;
  const auto indexes = load_indexes(transport, load_sources(common.sources));
  std::map<std::string, std::vector<Version>> found;
  for (const auto& idx : indexes) {
    for (const auto& e : idx.entries) {
      if (e.name.find(pattern) == std::string::npos) continue;
      auto& vs = found[e.name];
      if (std::none_of(vs.begin(), vs.end(), [&](const Version& v) { return v.str() == e.version.str(); })) {
        vs.push_back(e.version);
      }
    }
  }
  for (auto& [name, vs] : found) {
    std::stable_sort(vs.begin(), vs.end(), [](const Version& a, const Version& b) { return a < b; });
    out << name;
    for (const auto& v : vs) out << " " << v.str();
    out << "\n";
  }
  return kOk;
}

int do_show(const Common& common, const std::string& name, std::ostream& out) {
  DefaultTransport transport;
  const auto indexes = load_indexes(transport, load_sources(common.sources));
  const IndexEntry* best = nullptr;
  std::string repo;
  for (const auto& idx : indexes) {
    for (const auto& e : idx.entries) {
      if (e.name == name && (!best || compare_versions(e.version, best->version) > 0)) {
        best = &e;
        repo = idx.base_url;
      }
    }
  }
  if (!best) throw Error(Errc::NotFound, "no package named " + name, {name});
  out << render_entry(*best) << "Repository: " << repo << "\n";
  return kOk;
}

std::string upstream_text(const UpstreamRef& u) {
  switch (u.kind) {
    case UpstreamRef::Kind::none: return "none";
    case UpstreamRef::Kind::embedded: return "embedded " + u.archive_name;
    case UpstreamRef::Kind::url: return "url " + u.url;
  }
  return "none";
}

void print_manifest(const PackageManifest& m, std::ostream& out) {
  out << "Name: " << m.name << "\n";
  out << "Version: " << m.version.str() << "\n";
  out << "License: " << m.license << "\n";
  out << "Platform:";
  for (const auto& p : m.platforms) out << " " << p.str();
  out << "\n";
  out << "Maintainer: " << m.maintainer << "\n";
  out << "Description: " << m.description << "\n";
  out << "Upstream: " << upstream_text(m.upstream) << "\n";
  out << "Depends: " << render_depends_list(m.depends) << "\n";
  out << "Hooks:";
  for (const auto& h : m.hooks) out << " " << h.filename();
  out << "\n";
}

template <class F>
int guarded(std::ostream& err, F&& body) {
  try {
    return body();
  } catch (const UsageError& e) {
    err << "error: Usage: " << e.what() << "\n";
    return kUsage;
  } catch (const Error& e) {
    report_error(err, e);
    return exit_code_for(e.code());
  } catch (const std::exception& e) {
    err << "error: IoError: " << e.what() << "\n";
    return kFailure;
  }
}

}  // namespace

int exit_code_for(Errc code) noexcept {
  switch (code) {
    case Errc::NoCandidate:
    case Errc::PlatformMismatch:
    case Errc::DependencyCycle:
    case Errc::ConflictingConstraints:
    case Errc::ReplaceRefused:
    case Errc::NotFound:
      return kResolution;
    case Errc::TransportError:
    case Errc::IndexParseError:
    case Errc::ChecksumMismatch:
    case Errc::SizeMismatch:
    case Errc::UpstreamFetchFailed:
      return kTransport;
    case Errc::PermissionDenied:
    case Errc::NotADirectory:
    case Errc::CorruptRecord:
    case Errc::AlreadyRegistered:
    case Errc::LockHeld:
      return kDatabase;
    case Errc::IoError:
      return kFailure;
    default:
      return kBuild;
  }
}

int sapt_main(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"sapt - install packages and their dependencies from SDS repositories", "sapt"};
  app.require_subcommand(1);
  Common common;
  add_common(app, common);

  auto* install = app.add_subcommand("install", "Resolve and install packages into a prefix");
  std::vector<std::string> specs;
  std::string prefix;
  bool dry_run = false;
  bool no_replace = false;
  install->add_option("specs", specs, "name, name=version, name>=version, ...")->required();
  install->add_option("--prefix", prefix, "Installation directory")->required();
  install->add_flag("--dry-run", dry_run, "Print the plan and stop");
  install->add_flag("--no-replace", no_replace, "Abort instead of replacing an obsolete installed version");

  auto* search = app.add_subcommand("search", "List packages whose name contains a pattern");
  std::string pattern;
  search->add_option("pattern", pattern)->required();

  auto* show = app.add_subcommand("show", "Show the index entry of the newest version of a package");
  std::string name;
  show->add_option("name", name)->required();

  bool done = false;
  const int rc = parse_args(app, args, out, err, done);
  if (done) return rc;

  return guarded(err, [&] {
    if (*install) return do_install(common, specs, prefix, dry_run, no_replace, out, err);
    if (*search) return do_search(common, pattern, out);
    return do_show(common, name, out);
  });
}

int spkg_main(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"spkg - process a single SDS package", "spkg"};
  Common common;
  add_common(app, common);
  std::string package;
  std::string prefix;
  bool replace = false;
  bool info = false;
  app.add_option("package", package, "Package archive (.spkg) or unpacked package directory")->required();
  app.add_option("--prefix", prefix, "Installation directory");
  app.add_flag("--replace", replace, "Replace an already registered version");
  app.add_flag("--info", info, "Print the manifest without installing");

  bool done = false;
  const int rc = parse_args(app, args, out, err, done);
  if (done) return rc;

  return guarded(err, [&] {
    std::error_code ec;
    if (info) {
      const auto m = fs::is_regular_file(package, ec) ? load_package_archive(read_file_bytes(package))
                                                      : load_package(package);
      print_manifest(m, out);
      for (const auto& w : m.warnings) err << "warning: " << w << "\n";
      return kOk;
    }
    if (prefix.empty()) throw UsageError("--prefix is required to install");
    InstallOptions opts;
    opts.mode = replace ? RegisterMode::replace : RegisterMode::fresh;
    opts.platform = pick_platform(common.platform);
    if (!common.cache.empty()) opts.cache_dir = common.cache;
    try {
      const auto outcome = spkg_install(package, prefix, opts);
      for (const auto& r : outcome.reports) {
        out << stage_name(r.stage) << "." << phase_name(r.phase) << " "
            << (r.executor == StageReport::Executor::hook ? "hook" : "default") << " " << r.exit_status << "\n";
      }
      out << "installed " << outcome.manifest.name << " " << outcome.manifest.version.str() << "\n";
    } catch (const InstallFailure& f) {
      for (const auto& r : f.reports()) {
        out << stage_name(r.stage) << "." << phase_name(r.phase) << " "
            << (r.executor == StageReport::Executor::hook ? "hook" : "default") << " " << r.exit_status << "\n";
      }
      err << "build directory kept at " << f.build_dir().string() << "\n";
      throw;
    }
    return kOk;
  });
}

int sds_index_main(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"sds-index - build a repository Index from a directory of .spkg archives", "sds-index"};
  app.require_subcommand(1);
  auto* build = app.add_subcommand("build", "Write <dir>/Index");
  std::string dir;
  std::string output;
  build->add_option("dir", dir, "Repository directory")->required();
  build->add_option("-o,--output", output, "Write the index here instead ('-' for stdout)");

  bool done = false;
  const int rc = parse_args(app, args, out, err, done);
  if (done) return rc;

  return guarded(err, [&] {
    const auto result = build_index(dir);
    if (output == "-") {
      out << result.index_text;
    } else {
      write_file_atomic(output.empty() ? fs::path(dir) / "Index" : fs::path(output), result.index_text);
    }
    for (const auto& e : result.errors) err << "error: " << e << "\n";
    if (!result.errors.empty()) return static_cast<int>(kBuild);
    return static_cast<int>(kOk);
  });
}

}  // namespace sds::cli

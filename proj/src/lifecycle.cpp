#include "sds/lifecycle.hpp"

#include <stdlib.h>

#include <fstream>

#include "sds/archive.hpp"
#include "sds/error.hpp"

namespace sds {

namespace {

class TempDir {
 public:
  TempDir() {
    std::string tmpl = (fs::temp_directory_path() / "sds-XXXXXX").string();
    if (!::mkdtemp(tmpl.data())) throw Error(Errc::IoError, "cannot create temporary directory");
    path_ = tmpl;
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const fs::path& path() const noexcept { return path_; }

 private:
  fs::path path_;
};

void log_line(const fs::path& log, const std::string& line) {
  std::error_code ec;
  fs::create_directories(log.parent_path(), ec);
  std::ofstream f(log, std::ios::app);
  f << line << "\n";
}

fs::path log_path(const PackageManifest& m, const BuildContext& ctx, Stage s, Phase p) {
  return ctx.prefix->log_dir() / (m.name + "_" + m.version.str()) /
         (std::string(stage_name(s)) + "." + std::string(phase_name(p)) + ".log");
}

Environment stage_env(const PackageManifest& m, const BuildContext& ctx, Stage s, Phase p) {
  Environment env = ctx.env;
  env["SDS_NAME"] = m.name;
  env["SDS_VERSION"] = m.version.str();
  env["SDS_PREFIX"] = ctx.prefix->path().string();
  env["SDS_BUILD_DIR"] = ctx.build_dir.string();
  env["SDS_PKG_DIR"] = ctx.package_root.string();
  env["SDS_STAGE"] = std::string(stage_name(s));
  env["SDS_PHASE"] = std::string(phase_name(p));
  env["SDS_PLATFORM"] = ctx.platform.str();
  const auto bin = (ctx.prefix->path() / "bin").string();
  auto it = env.find("PATH");
  env["PATH"] = (it == env.end() || it->second.empty()) ? bin + ":/usr/bin:/bin" : bin + ":" + it->second;
  return env;
}

[[noreturn]] void stage_failed(Stage s, Phase p, const std::string& what, int status, const fs::path& log) {
  throw Error(Errc::HookFailed,
              std::string(stage_name(s)) + "." + std::string(phase_name(p)) + ": " + what + " exited with status " +
                  std::to_string(status) + " (log: " + log.string() + ")",
              {std::string(stage_name(s)), std::string(phase_name(p)), std::to_string(status), log.string()});
}

void run_checked(const std::vector<std::string>& argv, const Environment& env, const fs::path& cwd,
                 const fs::path& log, const BuildContext& ctx, Stage s, Phase p, const std::string& what) {
  const auto r = run_process(argv, env, cwd, log, ctx.hook_timeout);
  if (r.timed_out) log_line(log, "sds: timed out");
  if (r.exit_status != 0) stage_failed(s, p, what, r.exit_status, log);
}

// A tarball holding a single top-level directory is flattened into build-dir.
void flatten_single_dir(const fs::path& dir) {
  std::vector<fs::path> entries;
  for (const auto& e : fs::directory_iterator(dir)) entries.push_back(e.path());
  if (entries.size() != 1 || fs::is_symlink(entries.front()) || !fs::is_directory(entries.front())) return;
  const auto staged = dir / ".sds-flatten";
  fs::rename(entries.front(), staged);
  for (const auto& e : fs::directory_iterator(staged)) fs::rename(e.path(), dir / e.path().filename());
  fs::remove(staged);
}

std::optional<fs::path> find_makefile(const fs::path& dir) {
  for (const char* n : {"GNUmakefile", "makefile", "Makefile"}) {
    if (fs::is_regular_file(dir / n)) return dir / n;
  }
  return std::nullopt;
}

std::string url_basename(const std::string& url) {
  auto s = url.substr(0, url.find_first_of("?#"));
  while (!s.empty() && s.back() == '/') s.pop_back();
  const auto slash = s.rfind('/');
  auto base = slash == std::string::npos ? s : s.substr(slash + 1);
  if (base.empty() || base == "." || base == "..") base = "upstream";
  return base;
}

void default_extract(const PackageManifest& m, BuildContext& ctx, const fs::path& log) {
  switch (m.upstream.kind) {
    case UpstreamRef::Kind::none:
      log_line(log, "sds: no upstream, nothing to extract");
      return;
    case UpstreamRef::Kind::embedded: {
      const auto archive = ctx.package_root / "pkg" / m.upstream.archive_name;
      log_line(log, "sds: unpacking " + archive.string());
      extract_tarball(archive, ctx.build_dir);
      flatten_single_dir(ctx.build_dir);
      return;
    }
    case UpstreamRef::Kind::url: {
      const auto name = url_basename(m.upstream.url);
      const auto cache = ctx.download_cache / "upstream";
      const auto target = cache / name;
      log_line(log, "sds: fetching " + m.upstream.url);
      try {
        DefaultTransport fallback;
        Transport& t = ctx.transport ? *ctx.transport : fallback;
        const auto bytes = t.get(m.upstream.url);
        fs::create_directories(cache);
        write_file_atomic(target, bytes);
      } catch (const Error& e) {
        throw Error(Errc::UpstreamFetchFailed, "cannot fetch " + m.upstream.url + ": " + e.what(), {m.upstream.url});
      } catch (const fs::filesystem_error& e) {
        throw Error(Errc::UpstreamFetchFailed, "cannot store " + m.upstream.url + ": " + e.what(), {m.upstream.url});
      }
      if (is_archive_filename(name)) {
        extract_tarball(target, ctx.build_dir);
        flatten_single_dir(ctx.build_dir);
      } else {
        fs::copy_file(target, ctx.build_dir / name, fs::copy_options::overwrite_existing);
      }
      return;
    }
  }
}

void default_depends(const PackageManifest& m, const BuildContext& ctx, const fs::path& log) {
  std::vector<std::string> failing;
  for (const auto& clause : m.depends) {
    const auto v = ctx.prefix->satisfies(clause);
    switch (v.kind) {
      case Verdict::Kind::satisfied:
        log_line(log, "sds: " + render_clause(clause) + " satisfied by " + v.installed->str());
        break;
      case Verdict::Kind::violating:
        failing.push_back(render_clause(clause) + " (installed " + v.installed->str() + ")");
        break;
      case Verdict::Kind::absent:
        failing.push_back(render_clause(clause) + " (not installed)");
        break;
    }
  }
  for (const auto& f : failing) log_line(log, "sds: unsatisfied " + f);
  if (!failing.empty()) {
    std::string text;
    for (const auto& f : failing) text += (text.empty() ? "" : ", ") + f;
    throw Error(Errc::DependsUnsatisfied, m.name + ": unsatisfied dependencies: " + text, failing);
  }
}

void default_make(const PackageManifest& m, const BuildContext& ctx, Stage s, const Environment& env,
                  const fs::path& log) {
  (void)m;
  if (!find_makefile(ctx.build_dir)) {
    log_line(log, "sds: no makefile, nothing to do");
    return;
  }
  const auto path_it = env.find("PATH");
  if (!find_in_path("make", path_it == env.end() ? "" : path_it->second)) {
    throw Error(Errc::DefaultToolMissing, "'make' is required for the " + std::string(stage_name(s)) +
                                              " stage but was not found in PATH");
  }
  std::vector<std::string> argv{"make"};
  if (s == Stage::install) argv.push_back("install");
  run_checked(argv, env, ctx.build_dir, log, ctx, s, Phase::main, "make");
}

void default_register(const PackageManifest& m, const BuildContext& ctx, const fs::path& log) {
  InstallRecord r;
  r.name = m.name;
  r.version = m.version;
  r.platform = ctx.platform;
  const auto now = ctx.clock ? ctx.clock() : std::chrono::system_clock::now();
  r.installed_at = std::chrono::floor<std::chrono::seconds>(now);
  r.origin = ctx.origin;
  for (const auto& clause : m.depends) {
    if (auto rec = ctx.prefix->query(clause.name)) r.resolved_deps.emplace_back(rec->name, rec->version);
  }
  ctx.prefix->register_record(r, ctx.mode);
  log_line(log, "sds: registered " + m.name + " " + m.version.str());
}

void run_default(Stage s, const PackageManifest& m, BuildContext& ctx, const Environment& env, const fs::path& log) {
  switch (s) {
    case Stage::extract:
      default_extract(m, ctx, log);
      break;
    case Stage::depends:
      default_depends(m, ctx, log);
      break;
    case Stage::configure:
      if (is_executable_file(ctx.build_dir / "configure")) {
        run_checked({"./configure", "--prefix=" + ctx.prefix->path().string()}, env, ctx.build_dir, log, ctx, s,
                    Phase::main, "configure");
      } else {
        log_line(log, "sds: no configure script, nothing to do");
      }
      break;
    case Stage::build:
    case Stage::install:
      default_make(m, ctx, s, env, log);
      break;
    case Stage::registration:
      default_register(m, ctx, log);
      break;
  }
}

}  // namespace

void run_stage(Stage stage, const PackageManifest& manifest, BuildContext& ctx, std::vector<StageReport>& reports) {
  if (!ctx.prefix) throw Error(Errc::IoError, "run_stage: no install prefix");
  for (Phase phase : {Phase::pre, Phase::main, Phase::post}) {
    const bool hook = manifest.has_hook(stage, phase);
    if (phase != Phase::main && !hook) continue;

    const auto log = log_path(manifest, ctx, stage, phase);
    std::error_code ec;
    fs::create_directories(log.parent_path(), ec);
    const auto env = stage_env(manifest, ctx, stage, phase);
    StageReport report{stage, phase, hook ? StageReport::Executor::hook : StageReport::Executor::builtin, 0, log, {}};
    const auto started = std::chrono::steady_clock::now();

    if (hook) {
      const HookKind kind{stage, phase};
      const auto program = ctx.package_root / kind.filename();
      const auto cwd = (stage == Stage::extract && phase == Phase::pre) ? ctx.package_root : ctx.build_dir;
      const auto r = run_process({program.string()}, env, cwd, log, ctx.hook_timeout);
      if (r.timed_out) log_line(log, "sds: hook timed out");
      report.exit_status = r.exit_status;
      report.duration = std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - started);
      if (r.exit_status != 0) {
        reports.push_back(report);
        stage_failed(stage, phase, "hook " + kind.filename(), r.exit_status, log);
      }
    } else {
      try {
        run_default(stage, manifest, ctx, env, log);
      } catch (const Error& e) {
        report.exit_status = 1;
        reports.push_back(report);
        log_line(log, std::string("sds: ") + e.what());
        throw;
      } catch (const fs::filesystem_error& e) {
        report.exit_status = 1;
        reports.push_back(report);
        throw Error(Errc::IoError, std::string(stage_name(stage)) + ": " + e.what());
      }
      report.duration = std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - started);
    }
    reports.push_back(report);
  }
}

InstallOutcome spkg_install(const fs::path& package, const fs::path& prefix_path, const InstallOptions& opts) {
  std::optional<TempDir> staging;
  fs::path root = package;
  std::error_code ec;
  if (fs::is_regular_file(package, ec)) {
    staging.emplace();
    root = unpack(package, staging->path());
  }
  InstallOutcome outcome;
  outcome.manifest = load_package(root);
  const auto& m = outcome.manifest;

  if (!m.supports(opts.platform)) {
    std::string plats;
    for (const auto& p : m.platforms) plats += (plats.empty() ? "" : " ") + p.str();
    throw Error(Errc::PlatformUnsupported,
                m.name + " " + m.version.str() + " supports " + plats + ", not " + opts.platform.str(),
                {opts.platform.str()});
  }

  const auto prefix = InstallPrefix::init(prefix_path);
  const auto lock = prefix.lock();
  if (opts.mode == RegisterMode::fresh) {
    if (auto existing = prefix.query(m.name)) {
      throw Error(Errc::AlreadyRegistered,
                  m.name + " " + existing->version.str() + " is already registered in " + prefix.path().string(),
                  {m.name, existing->version.str()});
    }
  }

  BuildContext ctx;
  ctx.package_root = fs::absolute(root);
  ctx.build_dir = prefix.build_root() / (m.name + "_" + m.version.str());
  ctx.prefix = &prefix;
  ctx.platform = opts.platform;
  ctx.env = current_environment();
  ctx.download_cache = opts.cache_dir.empty() ? default_cache_dir() : opts.cache_dir;
  ctx.transport = opts.transport;
  ctx.mode = opts.mode;
  ctx.origin = opts.origin.empty() ? fs::absolute(package).string() : opts.origin;
  ctx.clock = opts.clock;
  ctx.hook_timeout = opts.hook_timeout;

  fs::remove_all(ctx.build_dir, ec);
  fs::create_directories(ctx.build_dir, ec);
  if (ec) throw Error(Errc::IoError, "cannot create build directory " + ctx.build_dir.string());
  fs::remove_all(prefix.log_dir() / (m.name + "_" + m.version.str()), ec);

  try {
    for (Stage s : kStages) run_stage(s, m, ctx, outcome.reports);
  } catch (const Error& e) {
    throw InstallFailure(e, outcome.reports, ctx.build_dir);
  } catch (const fs::filesystem_error& e) {
    throw InstallFailure(Error(Errc::IoError, e.what()), outcome.reports, ctx.build_dir);
  }
  fs::remove_all(ctx.build_dir, ec);
  return outcome;
}

}  // namespace sds

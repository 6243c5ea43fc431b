#include "sds/package.hpp"

#include <algorithm>
#include <map>

#include "sds/archive.hpp"
#include "sds/error.hpp"
#include "sds/process.hpp"

namespace sds {

namespace {

constexpr const char* kIdentification = "identification";

std::string trim(std::string_view s) {
  const auto ws = " \t\r\n";
  const auto b = s.find_first_not_of(ws);
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(ws);
  return std::string(s.substr(b, e - b + 1));
}

std::string read_identification(const PackageTree& tree, const std::string& field, bool required) {
  const std::string rel = std::string(kIdentification) + "/" + field;
  auto content = tree.read_file(rel);
  if (!content) {
    if (!required) return {};
    throw Error(Errc::MissingIdentificationFile, "missing identification file " + rel, {rel});
  }
  auto value = trim(*content);
  if (required && value.empty()) {
    throw Error(Errc::InvalidManifest, "identification file " + rel + " is empty", {rel});
  }
  return value;
}

UpstreamRef parse_upstream_url(const std::string& raw) {
  const auto url = trim(raw);
  if (url.find('\n') != std::string::npos) {
    throw Error(Errc::InvalidManifest, "upstream.url must be a single line");
  }
  if (!(url.starts_with("http://") || url.starts_with("https://") || url.starts_with("file://"))) {
    throw Error(Errc::InvalidManifest, "upstream.url must use http, https or file: '" + url + "'");
  }
  return UpstreamRef{UpstreamRef::Kind::url, url, {}};
}

class DirTree : public PackageTree {
 public:
  explicit DirTree(fs::path root) : root_(std::move(root)) {}

  std::optional<std::string> read_file(const std::string& rel) const override {
    const auto p = root_ / rel;
    std::error_code ec;
    if (!fs::is_regular_file(p, ec)) return std::nullopt;
    return read_file_bytes(p);
  }

  std::vector<Entry> list(const std::string& rel) const override {
    std::vector<Entry> out;
    const auto dir = rel.empty() ? root_ : root_ / rel;
    std::error_code ec;
    if (!fs::is_directory(dir, ec)) return out;
    for (const auto& e : fs::directory_iterator(dir, ec)) {
      Entry x;
      x.name = e.path().filename().string();
      x.is_dir = e.is_directory();
      x.executable = !x.is_dir && is_executable_file(e.path());
      out.push_back(std::move(x));
    }
    std::sort(out.begin(), out.end(), [](const Entry& a, const Entry& b) { return a.name < b.name; });
    return out;
  }

 private:
  fs::path root_;
};

// Package tree over extracted tar members, with the top-level directory stripped.
class MemberTree : public PackageTree {
 public:
  explicit MemberTree(const std::vector<TarMember>& members) {
    std::string top;
    for (const auto& m : members) {
      check_member_path(m.path);
      const auto slash = m.path.find('/');
      const auto first = m.path.substr(0, slash);
      if (top.empty()) top = first;
      if (first != top) {
        throw Error(Errc::MultipleTopLevelDirs, "archive has more than one top-level entry: " + top +
                                                    ", " + first);
      }
      if (slash == std::string::npos) {
        if (m.type != TarMember::Type::directory) {
          throw Error(Errc::CorruptArchive, "archive top-level entry is not a directory: " + m.path);
        }
        continue;
      }
      entries_.emplace(m.path.substr(slash + 1), &m);
    }
    if (top.empty()) throw Error(Errc::CorruptArchive, "archive is empty");
  }

  std::optional<std::string> read_file(const std::string& rel) const override {
    auto it = entries_.find(rel);
    if (it == entries_.end() || it->second->type != TarMember::Type::file) return std::nullopt;
    return it->second->data;
  }

  std::vector<Entry> list(const std::string& rel) const override {
    std::vector<Entry> out;
    const std::string prefix = rel.empty() ? "" : rel + "/";
    for (auto it = entries_.lower_bound(prefix); it != entries_.end(); ++it) {
      if (!it->first.starts_with(prefix)) break;
      const auto rest = it->first.substr(prefix.size());
      if (rest.empty() || rest.find('/') != std::string::npos) continue;
      const auto& m = *it->second;
      if (m.type == TarMember::Type::symlink) continue;
      out.push_back({rest, m.type == TarMember::Type::directory,
                     m.type == TarMember::Type::file && (m.mode & 0111) != 0});
    }
    return out;
  }

 private:
  std::map<std::string, const TarMember*> entries_;
};

}  // namespace

std::string_view stage_name(Stage s) noexcept {
  switch (s) {
    case Stage::extract: return "extract";
    case Stage::depends: return "depends";
    case Stage::configure: return "configure";
    case Stage::build: return "build";
    case Stage::install: return "install";
    case Stage::registration: return "register";
  }
  return "";
}

std::string_view phase_name(Phase p) noexcept {
  switch (p) {
    case Phase::pre: return "pre";
    case Phase::main: return "main";
    case Phase::post: return "post";
  }
  return "";
}

std::string HookKind::filename() const {
  const std::string base(stage_name(stage));
  switch (phase) {
    case Phase::pre: return "pre-" + base;
    case Phase::post: return "post-" + base;
    case Phase::main: break;
  }
  return base;
}

std::optional<HookKind> HookKind::from_filename(std::string_view name) {
  Phase phase = Phase::main;
  if (name.starts_with("pre-")) {
    phase = Phase::pre;
    name.remove_prefix(4);
  } else if (name.starts_with("post-")) {
    phase = Phase::post;
    name.remove_prefix(5);
  }
  for (Stage s : kStages) {
    if (stage_name(s) != name) continue;
    if (s == Stage::registration && phase == Phase::main) return std::nullopt;
    return HookKind{s, phase};
  }
  return std::nullopt;
}

bool PackageManifest::supports(const Platform& target) const {
  return std::any_of(platforms.begin(), platforms.end(),
                     [&](const Platform& p) { return p.matches(target); });
}

std::string PackageManifest::archive_filename() const { return name + "_" + version.str() + ".spkg"; }

bool is_archive_filename(std::string_view name) noexcept {
  for (std::string_view ext : {".tar", ".tar.gz", ".tgz", ".tar.bz2", ".tbz2", ".tar.xz", ".txz"}) {
    if (name.size() > ext.size() && name.ends_with(ext)) return true;
  }
  return false;
}

PackageManifest parse_manifest(const PackageTree& tree) {
  PackageManifest m;

  m.name = read_identification(tree, "NAME", true);
  if (!is_valid_package_name(m.name)) {
    throw Error(Errc::InvalidName, "invalid package name '" + m.name + "'", {m.name});
  }
  const auto version_text = read_identification(tree, "VERSION", true);
  try {
    m.version = Version::parse(version_text);
  } catch (const Error& e) {
    throw Error(Errc::InvalidVersion, "invalid VERSION '" + version_text + "': " + e.what());
  }
  m.license = read_identification(tree, "LICENSE", true);
  const auto platforms = read_identification(tree, "PLATFORM", true);
  std::size_t start = 0;
  while (start <= platforms.size()) {
    auto end = platforms.find('\n', start);
    if (end == std::string::npos) end = platforms.size();
    const auto line = trim(std::string_view(platforms).substr(start, end - start));
    if (!line.empty()) m.platforms.push_back(Platform::parse(line));
    start = end + 1;
  }
  m.maintainer = read_identification(tree, "MAINTAINER", true);
  m.description = read_identification(tree, "DESCRIPTION", false);

  if (auto deps = tree.read_file("depends/depends")) m.depends = parse_depends(*deps);

  std::vector<std::string> archives;
  for (const auto& e : tree.list("pkg")) {
    if (!e.is_dir && !e.name.starts_with(".") && is_archive_filename(e.name)) archives.push_back(e.name);
  }
  const auto url = tree.read_file("upstream.url");
  if (url && !archives.empty()) {
    throw Error(Errc::AmbiguousUpstream, "package has both upstream.url and an archive in pkg/");
  }
  if (archives.size() > 1) {
    throw Error(Errc::AmbiguousUpstream, "pkg/ holds more than one archive", archives);
  }
  if (url) {
    m.upstream = parse_upstream_url(*url);
  } else if (!archives.empty()) {
    m.upstream = UpstreamRef{UpstreamRef::Kind::embedded, {}, archives.front()};
  }

  for (const auto& e : tree.list("")) {
    if (e.is_dir) continue;
    if (e.name == "register") {
      throw Error(Errc::ForbiddenHook, "registration cannot be overridden by a 'register' hook", {e.name});
    }
    const auto hook = HookKind::from_filename(e.name);
    if (!hook) continue;
    if (e.executable) {
      m.hooks.insert(*hook);
    } else {
      m.warnings.push_back("'" + e.name + "' is not executable and is not used as a hook");
    }
  }
  return m;
}

PackageManifest load_package(const fs::path& root) {
  std::error_code ec;
  if (!fs::is_directory(root, ec)) {
    throw Error(Errc::IoError, "package directory not found: " + root.string());
  }
  return parse_manifest(DirTree(root));
}

PackageManifest load_package_archive(std::string_view archive_bytes) {
  const auto members = read_tar(gzip_decompress(archive_bytes));
  return parse_manifest(MemberTree(members));
}

fs::path pack(const fs::path& root, const fs::path& out_dir) {
  const auto manifest = load_package(root);
  const auto members = collect_tree(root, manifest.name);
  const auto bytes = gzip_compress(write_tar(members));
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) throw Error(Errc::IoError, "cannot create " + out_dir.string() + ": " + ec.message());
  const auto out = out_dir / manifest.archive_filename();
  write_file_atomic(out, bytes);
  return out;
}

fs::path unpack(const fs::path& archive, const fs::path& dest) {
  const auto members = read_tar(gzip_decompress(read_file_bytes(archive)));
  const MemberTree tree(members);  // validates paths and the single top-level directory
  extract_members(members, dest);
  return dest / members.front().path.substr(0, members.front().path.find('/'));
}

}  // namespace sds

#include "fixtures.hpp"

#include <stdlib.h>

#include <fstream>
#include <sstream>

#include "sds/repo.hpp"

namespace sds::testing {

ScratchDir::ScratchDir() {
  std::string tmpl = (fs::temp_directory_path() / "sds-test-XXXXXX").string();
  if (!::mkdtemp(tmpl.data())) throw std::runtime_error("mkdtemp failed");
  path_ = tmpl;
}

ScratchDir::~ScratchDir() {
  std::error_code ec;
  fs::remove_all(path_, ec);
}

void write_text(const fs::path& p, const std::string& text, bool executable) {
  if (!p.parent_path().empty()) fs::create_directories(p.parent_path());
  {
    std::ofstream f(p, std::ios::binary | std::ios::trunc);
    f << text;
  }
  fs::permissions(p, executable ? fs::perms(0755) : fs::perms(0644));
}

std::string read_text(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

std::string file_url(const fs::path& p) { return "file://" + fs::absolute(p).string(); }

fs::path write_package(const fs::path& parent, const PackageSpec& spec) {
  const auto root = parent / spec.name;
  fs::create_directories(root);
  write_text(root / "identification/NAME", spec.name + "\n");
  write_text(root / "identification/VERSION", spec.version + "\n");
  write_text(root / "identification/LICENSE", spec.license + "\n");
  std::string plats;
  for (const auto& p : spec.platforms) plats += p + "\n";
  write_text(root / "identification/PLATFORM", plats);
  write_text(root / "identification/MAINTAINER", spec.maintainer + "\n");
  if (!spec.description.empty()) write_text(root / "identification/DESCRIPTION", spec.description + "\n");
  if (!spec.depends.empty()) write_text(root / "depends/depends", spec.depends);
  fs::create_directories(root / "pkg");
  for (const auto& [name, body] : spec.hooks) write_text(root / name, body, true);
  for (const auto& [rel, body] : spec.files) write_text(root / rel, body);
  if (!spec.upstream_url.empty()) write_text(root / "upstream.url", spec.upstream_url + "\n");
  if (!spec.embedded_name.empty()) {
    const auto bytes = gzip_compress(write_tar(spec.embedded));
    std::ofstream f(root / "pkg" / spec.embedded_name, std::ios::binary);
    f << bytes;
  }
  return root;
}

PackageSpec gcc_like_spec(const std::string& upstream_url) {
  PackageSpec s;
  s.name = "gcc";
  s.version = "3.4.2";
  s.license = "GPL";
  s.platforms = {"any"};
  s.maintainer = "sds-team@example.org";
  s.depends = "# toolchain prerequisites\n";
  const std::string log = "#!/bin/sh\nbasename \"$0\" >> \"$SDS_PREFIX/../journal\"\n";
  s.hooks = {{"configure", log}, {"build", log}, {"post-install", log}};
  s.files = {{"depends/sds", "1\n"}};
  s.upstream_url = upstream_url;
  return s;
}

std::vector<TarMember> gnu_toy_members(const std::string& tool, const std::string& version) {
  const std::string top = tool + "-" + version;
  const std::string configure =
      "#!/bin/sh\n"
      "prefix=/usr/local\n"
      "for arg in \"$@\"; do\n"
      "  case \"$arg\" in --prefix=*) prefix=\"${arg#--prefix=}\" ;; esac\n"
      "done\n"
      "sed \"s|@PREFIX@|$prefix|\" Makefile.in > Makefile\n";
  const std::string makefile_in =
      "PREFIX = @PREFIX@\n"
      "all: " + tool + "\n" +
      tool + ": " + tool + ".in\n"
      "\tcp " + tool + ".in " + tool + "\n"
      "\tchmod +x " + tool + "\n"
      "install: " + tool + "\n"
      "\tmkdir -p $(PREFIX)/bin $(PREFIX)/share/" + tool + "\n"
      "\tcp " + tool + " $(PREFIX)/bin/" + tool + "\n"
      "\techo " + version + " > $(PREFIX)/share/" + tool + "/VERSION\n";
  const std::string script = "#!/bin/sh\necho " + tool + " " + version + "\n";
  return {
      {top, TarMember::Type::directory, 0755, {}, {}},
      {top + "/Makefile.in", TarMember::Type::file, 0644, makefile_in, {}},
      {top + "/configure", TarMember::Type::file, 0755, configure, {}},
      {top + "/" + tool + ".in", TarMember::Type::file, 0644, script, {}},
  };
}

std::string make_repo(const fs::path& repo_dir, const std::vector<PackageSpec>& specs, const fs::path& work_dir) {
  fs::create_directories(repo_dir);
  std::size_t n = 0;
  for (const auto& spec : specs) {
    const auto parent = work_dir / ("src" + std::to_string(n++));
    pack(write_package(parent, spec), repo_dir);
  }
  const auto result = build_index(repo_dir);
  if (!result.errors.empty()) throw std::runtime_error("make_repo: " + result.errors.front());
  write_file_atomic(repo_dir / "Index", result.index_text);
  return file_url(repo_dir);
}

std::map<std::string, std::string> snapshot_tree(const fs::path& root) {
  std::map<std::string, std::string> out;
  if (!fs::exists(root)) return out;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    const auto rel = e.path().lexically_relative(root).generic_string();
    const auto mode = std::to_string(static_cast<unsigned>(fs::symlink_status(e.path()).permissions()));
    if (e.is_directory()) {
      out[rel + "/"] = mode;
    } else if (e.is_regular_file()) {
      out[rel] = mode + ":" + read_text(e.path());
    }
  }
  return out;
}

}  // namespace sds::testing

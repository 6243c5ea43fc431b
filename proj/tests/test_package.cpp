#include <gtest/gtest.h>

#include <random>

#include "sds/archive.hpp"
#include "sds/error.hpp"
#include "sds/package.hpp"
#include "support/fixtures.hpp"

using namespace sds;
using namespace sds::testing;

namespace {

Errc load_error(const fs::path& root) {
  try {
    load_package(root);
  } catch (const Error& e) {
    return e.code();
  }
  return Errc::IoError;
}

PackageSpec minimal(const std::string& name) {
  PackageSpec s;
  s.name = name;
  return s;
}

}  // namespace

TEST(LoadPackage, GccLayout) {
  ScratchDir tmp;
  const auto root = write_package(tmp.path(), gcc_like_spec("https://ftp.gnu.org/gnu/gcc/gcc-3.4.2.tar.bz2"));
  const auto m = load_package(root);
  EXPECT_EQ(m.name, "gcc");
  EXPECT_EQ(m.version.str(), "3.4.2");
  EXPECT_EQ(m.upstream.kind, UpstreamRef::Kind::url);
  EXPECT_EQ(m.upstream.url, "https://ftp.gnu.org/gnu/gcc/gcc-3.4.2.tar.bz2");
  const std::set<HookKind> expected{{Stage::configure, Phase::main},
                                    {Stage::build, Phase::main},
                                    {Stage::install, Phase::post}};
  EXPECT_EQ(m.hooks, expected);
  EXPECT_TRUE(m.depends.empty());
  EXPECT_TRUE(m.description.empty());
}

TEST(LoadPackage, VirtualPackageHasNoUpstream) {
  ScratchDir tmp;
  auto spec = minimal("gnu_projet");
  spec.depends = "gcc\nmake\n";
  const auto m = load_package(write_package(tmp.path(), spec));
  EXPECT_EQ(m.upstream.kind, UpstreamRef::Kind::none);
  ASSERT_EQ(m.depends.size(), 2u);
  EXPECT_TRUE(m.hooks.empty());
}

TEST(LoadPackage, EmbeddedArchive) {
  ScratchDir tmp;
  auto spec = minimal("hello");
  spec.embedded_name = "hello-1.0.tar.gz";
  spec.embedded = gnu_toy_members("hello", "1.0");
  spec.files = {{"pkg/fix-build.patch", "--- a\n+++ b\n"}};
  const auto m = load_package(write_package(tmp.path(), spec));
  EXPECT_EQ(m.upstream.kind, UpstreamRef::Kind::embedded);
  EXPECT_EQ(m.upstream.archive_name, "hello-1.0.tar.gz");
}

TEST(LoadPackage, RegisterHookIsForbidden) {
  ScratchDir tmp;
  auto spec = minimal("bad");
  spec.hooks = {{"register", "#!/bin/sh\n"}};
  EXPECT_EQ(load_error(write_package(tmp.path(), spec)), Errc::ForbiddenHook);

  ScratchDir tmp2;
  auto plain = minimal("bad");
  plain.files = {{"register", "not executable"}};
  EXPECT_EQ(load_error(write_package(tmp2.path(), plain)), Errc::ForbiddenHook);
}

TEST(LoadPackage, PrePostRegisterHooksAreAllowed) {
  ScratchDir tmp;
  auto spec = minimal("ok");
  spec.hooks = {{"pre-register", "#!/bin/sh\n"}, {"post-register", "#!/bin/sh\n"}};
  const auto m = load_package(write_package(tmp.path(), spec));
  EXPECT_TRUE(m.has_hook(Stage::registration, Phase::pre));
  EXPECT_TRUE(m.has_hook(Stage::registration, Phase::post));
}

TEST(LoadPackage, NonExecutableHookIsAWarning) {
  ScratchDir tmp;
  auto spec = minimal("warn");
  spec.files = {{"configure", "#!/bin/sh\n"}};
  const auto m = load_package(write_package(tmp.path(), spec));
  EXPECT_TRUE(m.hooks.empty());
  ASSERT_EQ(m.warnings.size(), 1u);
  EXPECT_NE(m.warnings.front().find("configure"), std::string::npos);
}

TEST(LoadPackage, MissingIdentificationFileIsNamed) {
  for (const char* field : {"NAME", "VERSION", "LICENSE", "PLATFORM", "MAINTAINER"}) {
    ScratchDir tmp;
    const auto root = write_package(tmp.path(), minimal("pkg"));
    fs::remove(root / "identification" / field);
    try {
      load_package(root);
      FAIL() << field;
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), Errc::MissingIdentificationFile);
      ASSERT_EQ(e.details().size(), 1u);
      EXPECT_EQ(e.details().front(), std::string("identification/") + field);
    }
  }
}

TEST(LoadPackage, ValidationErrors) {
  {
    ScratchDir tmp;
    auto s = minimal("pkg");
    s.version = "1.0-beta";
    EXPECT_EQ(load_error(write_package(tmp.path(), s)), Errc::InvalidVersion);
  }
  {
    ScratchDir tmp;
    auto s = minimal("pkg");
    s.platforms = {"linux-x86_64", "solaris"};
    EXPECT_EQ(load_error(write_package(tmp.path(), s)), Errc::InvalidPlatform);
  }
  {
    ScratchDir tmp;
    auto s = minimal("pkg");
    s.upstream_url = "https://example.org/pkg-1.0.tar.gz";
    s.embedded_name = "pkg-1.0.tar.gz";
    s.embedded = gnu_toy_members("pkg", "1.0");
    EXPECT_EQ(load_error(write_package(tmp.path(), s)), Errc::AmbiguousUpstream);
  }
  {
    ScratchDir tmp;
    auto s = minimal("pkg");
    s.upstream_url = "ftp://example.org/pkg.tar.gz";
    EXPECT_EQ(load_error(write_package(tmp.path(), s)), Errc::InvalidManifest);
  }
  {
    ScratchDir tmp;
    auto s = minimal("pkg");
    s.depends = "a\na\n";
    EXPECT_EQ(load_error(write_package(tmp.path(), s)), Errc::DuplicateDependency);
  }
  {
    ScratchDir tmp;
    const auto root = write_package(tmp.path(), minimal("pkg"));
    write_text(root / "identification/NAME", "Not A Name\n");
    EXPECT_EQ(load_error(root), Errc::InvalidName);
  }
  {
    ScratchDir tmp;
    const auto root = write_package(tmp.path(), minimal("pkg"));
    write_text(root / "identification/LICENSE", "\n");
    EXPECT_EQ(load_error(root), Errc::InvalidManifest);
  }
}

TEST(LoadPackage, MultiplePlatformsOnePerLine) {
  ScratchDir tmp;
  auto s = minimal("pkg");
  s.platforms = {"linux-x86_64", "sunos-sparc", ""};
  const auto m = load_package(write_package(tmp.path(), s));
  ASSERT_EQ(m.platforms.size(), 2u);
  EXPECT_TRUE(m.supports(Platform::parse("sunos-sparc")));
  EXPECT_FALSE(m.supports(Platform::parse("linux-aarch64")));
}

TEST(Pack, RoundTripsToIdenticalTree) {
  ScratchDir tmp;
  auto spec = gcc_like_spec("file:///nonexistent/gcc-3.4.2.tar.gz");
  spec.files["pkg/notes/README"] = "docs\n";
  const auto root = write_package(tmp / "src", spec);
  const auto archive = pack(root, tmp / "out");
  EXPECT_EQ(archive.filename(), "gcc_3.4.2.spkg");
  const auto unpacked = unpack(archive, tmp / "unpacked");
  EXPECT_EQ(unpacked, tmp / "unpacked" / "gcc");
  EXPECT_EQ(snapshot_tree(unpacked), snapshot_tree(root));
  EXPECT_EQ(load_package(unpacked).hooks, load_package(root).hooks);
}

TEST(Pack, IsByteDeterministic) {
  ScratchDir tmp;
  const auto root = write_package(tmp / "src", gcc_like_spec("file:///x/gcc.tar.gz"));
  const auto a = read_file_bytes(pack(root, tmp / "a"));
  // touch everything so mtimes differ
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    fs::last_write_time(e.path(), fs::file_time_type::clock::now() + std::chrono::hours(1));
  }
  const auto b = read_file_bytes(pack(root, tmp / "b"));
  EXPECT_EQ(a, b);
}

TEST(Pack, ArchiveRepackIsIdentity) {
  ScratchDir tmp;
  const auto root = write_package(tmp / "src", gcc_like_spec("file:///x/gcc.tar.gz"));
  const auto first = pack(root, tmp / "a");
  const auto unpacked = unpack(first, tmp / "u");
  const auto second = pack(unpacked, tmp / "b");
  EXPECT_EQ(read_file_bytes(first), read_file_bytes(second));
}

TEST(Pack, InvalidRootCreatesNothing) {
  ScratchDir tmp;
  auto spec = minimal("bad");
  spec.hooks = {{"register", "#!/bin/sh\n"}};
  const auto root = write_package(tmp / "src", spec);
  EXPECT_THROW(pack(root, tmp / "out"), Error);
  EXPECT_FALSE(fs::exists(tmp / "out"));
}

TEST(Unpack, RejectsTraversal) {
  ScratchDir tmp;
  const std::vector<TarMember> members{{"gcc", TarMember::Type::directory, 0755, {}, {}},
                                       {"../evil", TarMember::Type::file, 0644, "x", {}}};
  write_text(tmp / "evil.spkg", gzip_compress(write_tar(members)));
  try {
    unpack(tmp / "evil.spkg", tmp / "dest");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::PathTraversal);
  }
  EXPECT_FALSE(fs::exists(tmp / "evil"));

  const std::vector<TarMember> abs{{"/tmp/evil", TarMember::Type::file, 0644, "x", {}}};
  write_text(tmp / "abs.spkg", gzip_compress(write_tar(abs)));
  EXPECT_THROW(unpack(tmp / "abs.spkg", tmp / "dest2"), Error);
}

TEST(Unpack, RejectsTruncatedGzip) {
  ScratchDir tmp;
  const auto archive = pack(write_package(tmp / "src", gcc_like_spec("file:///x/y.tar.gz")), tmp / "out");
  auto bytes = read_file_bytes(archive);
  bytes.resize(bytes.size() / 2);
  write_text(tmp / "trunc.spkg", bytes);
  try {
    unpack(tmp / "trunc.spkg", tmp / "dest");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::CorruptArchive);
  }
}

TEST(Unpack, RejectsMultipleTopLevelDirs) {
  ScratchDir tmp;
  const std::vector<TarMember> members{{"a", TarMember::Type::directory, 0755, {}, {}},
                                       {"b", TarMember::Type::directory, 0755, {}, {}}};
  write_text(tmp / "two.spkg", gzip_compress(write_tar(members)));
  try {
    unpack(tmp / "two.spkg", tmp / "dest");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::MultipleTopLevelDirs);
  }
}

TEST(LoadPackageArchive, MatchesDirectoryLoad) {
  ScratchDir tmp;
  auto spec = gcc_like_spec("file:///x/gcc.tar.gz");
  spec.depends = "binutils (>= 2.15)\nmake\n";
  spec.description = "GNU compiler collection";
  const auto root = write_package(tmp / "src", spec);
  const auto from_dir = load_package(root);
  const auto from_archive = load_package_archive(read_file_bytes(pack(root, tmp / "out")));
  EXPECT_EQ(from_archive.name, from_dir.name);
  EXPECT_EQ(from_archive.version.str(), from_dir.version.str());
  EXPECT_EQ(from_archive.depends, from_dir.depends);
  EXPECT_EQ(from_archive.hooks, from_dir.hooks);
  EXPECT_EQ(from_archive.description, "GNU compiler collection");
}

TEST(Tar, LongPathsRoundTrip) {
  const std::string deep = std::string(90, 'd') + "/" + std::string(90, 'e') + "/file.txt";
  const std::string very = std::string(300, 'x');
  std::vector<TarMember> members{{deep, TarMember::Type::file, 0600, "deep", {}},
                                 {very, TarMember::Type::file, 0755, "long", {}},
                                 {"link", TarMember::Type::symlink, 0777, {}, "file.txt"}};
  const auto back = read_tar(write_tar(members));
  ASSERT_EQ(back.size(), 3u);
  EXPECT_EQ(back[0].path, deep);
  EXPECT_EQ(back[0].mode, 0600u);
  EXPECT_EQ(back[1].path, very);
  EXPECT_EQ(back[1].data, "long");
  EXPECT_EQ(back[2].type, TarMember::Type::symlink);
  EXPECT_EQ(back[2].linkname, "file.txt");
}

TEST(Tar, RejectsBadChecksumAndTruncation) {
  auto bytes = write_tar({{"a.txt", TarMember::Type::file, 0644, "hello", {}}});
  auto corrupted = bytes;
  corrupted[0] = 'b';
  EXPECT_THROW(read_tar(corrupted), Error);
  EXPECT_THROW(read_tar(bytes.substr(0, 600)), Error);
}

TEST(Tar, ReadsSystemTarOutput) {
  ScratchDir tmp;
  write_text(tmp / "in/proj-1.0/configure", "#!/bin/sh\n", true);
  write_text(tmp / "in/proj-1.0/src/main.c", "int main(){}\n");
  const auto cmd = "tar -czf " + (tmp / "proj.tar.gz").string() + " -C " + (tmp / "in").string() + " proj-1.0";
  ASSERT_EQ(std::system(cmd.c_str()), 0);
  extract_tarball(tmp / "proj.tar.gz", tmp / "out");
  EXPECT_TRUE(fs::exists(tmp / "out/proj-1.0/src/main.c"));
  EXPECT_TRUE((fs::status(tmp / "out/proj-1.0/configure").permissions() & fs::perms::owner_exec) != fs::perms::none);
}

TEST(Extract, RefusesWritesThroughSymlinks) {
  ScratchDir tmp;
  fs::create_directories(tmp / "outside");
  std::vector<TarMember> members{{"d", TarMember::Type::symlink, 0777, {}, (tmp / "outside").string()},
                                 {"d/payload", TarMember::Type::file, 0644, "x", {}}};
  EXPECT_THROW(extract_members(members, tmp / "dest", {.allow_symlinks = true}), Error);
  EXPECT_FALSE(fs::exists(tmp / "outside/payload"));
}

TEST(Gzip, RandomPayloadRoundTrip) {
  std::mt19937 rng(1);
  std::string data(100000, '\0');
  for (auto& c : data) c = static_cast<char>(rng() % 7);
  EXPECT_EQ(gzip_decompress(gzip_compress(data)), data);
  EXPECT_THROW(gzip_decompress("not gzip"), Error);
}

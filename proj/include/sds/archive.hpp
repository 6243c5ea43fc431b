#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace sds {

namespace fs = std::filesystem;

struct TarMember {
  enum class Type { file, directory, symlink };
  std::string path;  // relative, '/'-separated, no trailing slash
  Type type = Type::file;
  std::uint32_t mode = 0644;
  std::string data;      // file contents
  std::string linkname;  // symlink target
};

/// ustar writer. Timestamps, owners and group are zeroed; long names
/// use the ustar prefix field, then a GNU long-name record.
std::string write_tar(const std::vector<TarMember>& members);

/// Reads ustar, GNU long-name and pax path records. Throws CorruptArchive.
std::vector<TarMember> read_tar(std::string_view data);

std::string gzip_compress(std::string_view data);
/// Throws CorruptArchive on malformed or truncated input.
std::string gzip_decompress(std::string_view data);
bool looks_gzipped(std::string_view data) noexcept;

/// Collects a directory into members sorted by path, paths prefixed with
/// `prefix` (may be empty). Symlinks are rejected unless `allow_symlinks`.
std::vector<TarMember> collect_tree(const fs::path& root, const std::string& prefix,
                                    bool allow_symlinks = false);

/// Throws PathTraversal for absolute paths or `..` components.
void check_member_path(const std::string& path);

struct ExtractOptions {
  bool allow_symlinks = false;
};

/// Writes members under dest. Rejects absolute paths, `..` components and
/// writes through symlinks with PathTraversal.
void extract_members(const std::vector<TarMember>& members, const fs::path& dest,
                     ExtractOptions opts = {});

/// Unpacks a tarball (gzip or plain) into dest. Other formats are handed to
/// the system `tar`.
void extract_tarball(const fs::path& tarball, const fs::path& dest);

std::string read_file_bytes(const fs::path& p);
/// Writes via a sibling temp file and rename.
void write_file_atomic(const fs::path& p, std::string_view bytes);

}  // namespace sds

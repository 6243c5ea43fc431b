#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "sds/depends.hpp"
#include "sds/platform.hpp"
#include "sds/version.hpp"

namespace sds {

namespace fs = std::filesystem;

struct IndexEntry {
  std::string name;
  Version version;
  std::vector<Platform> platforms;
  std::string filename;
  std::uint64_t size = 0;
  std::string sha256;
  std::vector<DependencyClause> depends;
  std::string description;

  bool supports(const Platform& target) const;
  friend bool operator==(const IndexEntry& a, const IndexEntry& b);
};

struct RepositoryIndex {
  std::string base_url;
  std::vector<IndexEntry> entries;  // sorted by (name, version)
};

/// Stanza text for one entry (no trailing blank line).
std::string render_entry(const IndexEntry& e);
/// Full `Index` file: header stanza, then one stanza per entry.
std::string render_index(const std::vector<IndexEntry>& entries);
/// Throws IndexParseError with the offending line number.
std::vector<IndexEntry> parse_index(std::string_view text);

/// Fetches bytes by URL. Implementations: file://, http(s):// via libcurl.
class Transport {
 public:
  virtual ~Transport() = default;
  /// Throws TransportError.
  virtual std::string get(const std::string& url) = 0;
};

class FileTransport : public Transport {
 public:
  std::string get(const std::string& url) override;
};

class CurlTransport : public Transport {
 public:
  std::string get(const std::string& url) override;
};

/// Dispatches on the URL scheme.
class DefaultTransport : public Transport {
 public:
  std::string get(const std::string& url) override;

 private:
  FileTransport file_;
  CurlTransport curl_;
};

/// `file:///x/y` -> `/x/y`; throws TransportError for other schemes.
fs::path file_url_path(std::string_view url);
std::string join_url(std::string_view base, std::string_view leaf);

std::string sha256_hex(std::string_view bytes);

struct IndexBuildResult {
  std::vector<IndexEntry> entries;
  std::vector<std::string> errors;  // one diagnostic per excluded archive
  std::string index_text;
};

/// Scans `dir` for `*.spkg`, validates each in memory and renders the index.
IndexBuildResult build_index(const fs::path& dir);

RepositoryIndex fetch_index(Transport& transport, const std::string& base_url);

/// Downloads into `<cache>/<filename>` after verifying size and digest.
/// A cached file with the right digest is reused without a transport call.
fs::path fetch_package(Transport& transport, const IndexEntry& entry,
                       const std::string& base_url, const fs::path& cache_dir);

/// One URL per line, `#` comments.
std::vector<std::string> parse_sources(std::string_view text);
/// `$SDS_SOURCES`, else `~/.sds/sources`.
fs::path default_sources_path();
fs::path default_cache_dir();

}  // namespace sds

#include "sds/repo.hpp"

#include <curl/curl.h>
#include <openssl/evp.h>
#include <unistd.h>

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>

#include "sds/archive.hpp"
#include "sds/error.hpp"
#include "sds/package.hpp"

namespace sds {

namespace {

constexpr std::string_view kIndexHeader = "Format: sds-index 1";

std::string trim(std::string_view s) {
  const auto ws = " \t\r";
  const auto b = s.find_first_not_of(ws);
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(ws);
  return std::string(s.substr(b, e - b + 1));
}

bool is_hex_digest(std::string_view s) {
  return s.size() == 64 && std::all_of(s.begin(), s.end(), [](char c) {
           return (c >= '0' && c <= '9') || (c >= 'a' && c <= 'f');
         });
}

[[noreturn]] void index_error(std::size_t line, const std::string& what) {
  throw Error(Errc::IndexParseError, "Index line " + std::to_string(line) + ": " + what,
              {std::to_string(line)});
}

struct Stanza {
  std::size_t first_line = 0;
  std::vector<std::pair<std::string, std::string>> fields;
  std::map<std::string, std::size_t> line_of;
};

bool entry_less(const IndexEntry& a, const IndexEntry& b) {
  if (a.name != b.name) return a.name < b.name;
  return compare_versions(a.version, b.version) < 0;
}

IndexEntry entry_from_stanza(const Stanza& st) {
  std::map<std::string, std::string> f(st.fields.begin(), st.fields.end());
  auto need = [&](const char* key) -> const std::string& {
    auto it = f.find(key);
    if (it == f.end()) index_error(st.first_line, std::string("missing field ") + key);
    return it->second;
  };
  auto line = [&](const char* key) {
    auto it = st.line_of.find(key);
    return it == st.line_of.end() ? st.first_line : it->second;
  };
  IndexEntry e;
  e.name = need("Name");
  if (!is_valid_package_name(e.name)) index_error(line("Name"), "invalid package name '" + e.name + "'");
  try {
    e.version = Version::parse(need("Version"));
  } catch (const Error& err) {
    index_error(line("Version"), err.what());
  }
  try {
    const auto& plats = need("Platform");
    std::size_t p = 0;
    while (p < plats.size()) {
      auto sp = plats.find(' ', p);
      if (sp == std::string::npos) sp = plats.size();
      if (sp > p) e.platforms.push_back(Platform::parse(std::string_view(plats).substr(p, sp - p)));
      p = sp + 1;
    }
  } catch (const Error& err) {
    index_error(line("Platform"), err.what());
  }
  if (e.platforms.empty()) index_error(line("Platform"), "empty Platform field");
  e.filename = need("Filename");
  if (e.filename != e.name + "_" + e.version.str() + ".spkg") {
    index_error(line("Filename"), "Filename does not match <name>_<version>.spkg");
  }
  const auto& size = need("Size");
  if (size.empty() || !std::all_of(size.begin(), size.end(), [](char c) { return c >= '0' && c <= '9'; })) {
    index_error(line("Size"), "Size is not a number");
  }
  e.size = std::stoull(size);
  e.sha256 = need("SHA256");
  if (!is_hex_digest(e.sha256)) index_error(line("SHA256"), "SHA256 is not 64 lowercase hex digits");
  if (auto it = f.find("Depends"); it != f.end()) {
    try {
      e.depends = parse_depends_list(it->second);
    } catch (const Error& err) {
      index_error(line("Depends"), err.what());
    }
  }
  if (auto it = f.find("Description"); it != f.end()) e.description = it->second;
  return e;
}

}  // namespace

bool IndexEntry::supports(const Platform& target) const {
  return std::any_of(platforms.begin(), platforms.end(), [&](const Platform& p) { return p.matches(target); });
}

bool operator==(const IndexEntry& a, const IndexEntry& b) {
  return a.name == b.name && a.version.str() == b.version.str() && a.platforms == b.platforms &&
         a.filename == b.filename && a.size == b.size && a.sha256 == b.sha256 && a.depends == b.depends &&
         a.description == b.description;
}

std::string render_entry(const IndexEntry& e) {
  std::string plats;
  for (const auto& p : e.platforms) {
    if (!plats.empty()) plats += ' ';
    plats += p.str();
  }
  std::string out;
  out += "Name: " + e.name + "\n";
  out += "Version: " + e.version.str() + "\n";
  out += "Platform: " + plats + "\n";
  out += "Filename: " + e.filename + "\n";
  out += "Size: " + std::to_string(e.size) + "\n";
  out += "SHA256: " + e.sha256 + "\n";
  if (!e.depends.empty()) out += "Depends: " + render_depends_list(e.depends) + "\n";
  out += "Description: " + e.description + "\n";
  return out;
}

std::string render_index(const std::vector<IndexEntry>& entries) {
  std::string out(kIndexHeader);
  out += "\n";
  for (const auto& e : entries) out += "\n" + render_entry(e);
  return out;
}

std::vector<IndexEntry> parse_index(std::string_view text) {
  std::vector<Stanza> stanzas;
  Stanza cur;
  std::size_t line_no = 0;
  std::size_t start = 0;
  auto flush = [&] {
    if (!cur.fields.empty()) stanzas.push_back(std::move(cur));
    cur = Stanza{};
  };
  while (start < text.size()) {
    auto end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    ++line_no;
    const auto raw = text.substr(start, end - start);
    start = end + 1;
    if (trim(raw).empty()) {
      flush();
      continue;
    }
    const auto colon = raw.find(':');
    if (colon == std::string_view::npos || colon == 0) index_error(line_no, "expected 'Field: value'");
    std::string key(raw.substr(0, colon));
    if (cur.fields.empty()) cur.first_line = line_no;
    if (cur.line_of.count(key)) index_error(line_no, "duplicate field " + key);
    cur.line_of[key] = line_no;
    cur.fields.emplace_back(std::move(key), trim(raw.substr(colon + 1)));
  }
  flush();

  if (stanzas.empty() || stanzas.front().fields.size() != 1 ||
      stanzas.front().fields.front().first + ": " + stanzas.front().fields.front().second != kIndexHeader) {
    index_error(1, "missing '" + std::string(kIndexHeader) + "' header");
  }
  std::vector<IndexEntry> entries;
  for (std::size_t i = 1; i < stanzas.size(); ++i) {
    auto e = entry_from_stanza(stanzas[i]);
    if (!entries.empty()) {
      const auto& prev = entries.back();
      if (prev.name == e.name && compare_versions(prev.version, e.version) == 0) {
        index_error(stanzas[i].first_line, "duplicate entry " + e.name + " " + e.version.str());
      }
      if (!entry_less(prev, e)) index_error(stanzas[i].first_line, "entries are not sorted");
    }
    entries.push_back(std::move(e));
  }
  return entries;
}

fs::path file_url_path(std::string_view url) {
  std::string_view rest;
  if (url.starts_with("file://localhost/")) {
    rest = url.substr(16);
  } else if (url.starts_with("file:///")) {
    rest = url.substr(7);
  } else {
    throw Error(Errc::TransportError, "not an absolute file URL: " + std::string(url));
  }
  return fs::path(std::string(rest));
}

std::string join_url(std::string_view base, std::string_view leaf) {
  std::string out(base);
  while (!out.empty() && out.back() == '/') out.pop_back();
  return out + "/" + std::string(leaf);
}

std::string FileTransport::get(const std::string& url) {
  const auto path = file_url_path(url);
  std::error_code ec;
  if (!fs::is_regular_file(path, ec)) {
    throw Error(Errc::TransportError, "not found: " + url, {"404"});
  }
  try {
    return read_file_bytes(path);
  } catch (const Error& e) {
    throw Error(Errc::TransportError, std::string(e.what()), {"io"});
  }
}

namespace {

std::size_t curl_write(char* ptr, std::size_t size, std::size_t nmemb, void* userdata) {
  static_cast<std::string*>(userdata)->append(ptr, size * nmemb);
  return size * nmemb;
}

}  // namespace

std::string CurlTransport::get(const std::string& url) {
  static std::once_flag init;
  std::call_once(init, [] { curl_global_init(CURL_GLOBAL_DEFAULT); });
  std::unique_ptr<CURL, decltype(&curl_easy_cleanup)> h(curl_easy_init(), &curl_easy_cleanup);
  if (!h) throw Error(Errc::TransportError, "curl_easy_init failed");
  std::string body;
  curl_easy_setopt(h.get(), CURLOPT_URL, url.c_str());
  curl_easy_setopt(h.get(), CURLOPT_FOLLOWLOCATION, 1L);
  curl_easy_setopt(h.get(), CURLOPT_WRITEFUNCTION, &curl_write);
  curl_easy_setopt(h.get(), CURLOPT_WRITEDATA, &body);
  curl_easy_setopt(h.get(), CURLOPT_NOSIGNAL, 1L);
  curl_easy_setopt(h.get(), CURLOPT_CONNECTTIMEOUT, 30L);
  const CURLcode rc = curl_easy_perform(h.get());
  if (rc != CURLE_OK) {
    throw Error(Errc::TransportError, "GET " + url + ": " + curl_easy_strerror(rc),
                {std::to_string(static_cast<int>(rc))});
  }
  long status = 0;
  curl_easy_getinfo(h.get(), CURLINFO_RESPONSE_CODE, &status);
  if (status >= 400) {
    throw Error(Errc::TransportError, "GET " + url + ": HTTP " + std::to_string(status),
                {std::to_string(status)});
  }
  return body;
}

std::string DefaultTransport::get(const std::string& url) {
  if (url.starts_with("file:")) return file_.get(url);
  if (url.starts_with("http://") || url.starts_with("https://")) return curl_.get(url);
  throw Error(Errc::TransportError, "unsupported URL scheme: " + url);
}

std::string sha256_hex(std::string_view bytes) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), md, &len, EVP_sha256(), nullptr) != 1) {
    throw Error(Errc::IoError, "sha256 failed");
  }
  static constexpr char hex[] = "0123456789abcdef";
  std::string out;
  out.reserve(2 * len);
  for (unsigned i = 0; i < len; ++i) {
    out += hex[md[i] >> 4];
    out += hex[md[i] & 0xf];
  }
  return out;
}

IndexBuildResult build_index(const fs::path& dir) {
  std::error_code ec;
  if (!fs::is_directory(dir, ec)) throw Error(Errc::IoError, "not a directory: " + dir.string());
  std::vector<fs::path> archives;
  for (const auto& e : fs::directory_iterator(dir, ec)) {
    if (e.is_regular_file() && e.path().extension() == ".spkg") archives.push_back(e.path());
  }
  if (ec) throw Error(Errc::IoError, "cannot list " + dir.string() + ": " + ec.message());
  std::sort(archives.begin(), archives.end());

  IndexBuildResult result;
  for (const auto& path : archives) {
    const auto fname = path.filename().string();
    try {
      const auto bytes = read_file_bytes(path);
      const auto m = load_package_archive(bytes);
      if (m.archive_filename() != fname) {
        throw Error(Errc::InvalidManifest, "file name does not match manifest (expected " +
                                               m.archive_filename() + ")");
      }
      IndexEntry e;
      e.name = m.name;
      e.version = m.version;
      e.platforms = m.platforms;
      e.filename = fname;
      e.size = bytes.size();
      e.sha256 = sha256_hex(bytes);
      e.depends = m.depends;
      e.description = m.description.substr(0, m.description.find('\n'));
      result.entries.push_back(std::move(e));
    } catch (const Error& err) {
      result.errors.push_back(fname + ": " + std::string(errc_name(err.code())) + ": " + err.what());
    }
  }
  std::stable_sort(result.entries.begin(), result.entries.end(), entry_less);
  std::vector<IndexEntry> unique;
  for (auto& e : result.entries) {
    if (!unique.empty() && unique.back().name == e.name &&
        compare_versions(unique.back().version, e.version) == 0) {
      result.errors.push_back(e.filename + ": duplicate of " + unique.back().filename);
      continue;
    }
    unique.push_back(std::move(e));
  }
  result.entries = std::move(unique);
  result.index_text = render_index(result.entries);
  return result;
}

RepositoryIndex fetch_index(Transport& transport, const std::string& base_url) {
  RepositoryIndex idx;
  idx.base_url = base_url;
  idx.entries = parse_index(transport.get(join_url(base_url, "Index")));
  return idx;
}

fs::path fetch_package(Transport& transport, const IndexEntry& entry, const std::string& base_url,
                       const fs::path& cache_dir) {
  if (entry.filename.find('/') != std::string::npos || entry.filename.starts_with(".")) {
    throw Error(Errc::IndexParseError, "unsafe filename in index: " + entry.filename);
  }
  std::error_code ec;
  fs::create_directories(cache_dir, ec);
  if (ec) throw Error(Errc::IoError, "cannot create cache " + cache_dir.string() + ": " + ec.message());
  const auto final_path = cache_dir / entry.filename;

  if (fs::is_regular_file(final_path, ec)) {
    try {
      const auto cached = read_file_bytes(final_path);
      if (cached.size() == entry.size && sha256_hex(cached) == entry.sha256) return final_path;
    } catch (const Error&) {
    }
    fs::remove(final_path, ec);
  }

  const auto bytes = transport.get(join_url(base_url, entry.filename));
  if (bytes.size() != entry.size) {
    throw Error(Errc::SizeMismatch,
                entry.filename + ": expected " + std::to_string(entry.size) + " bytes, got " +
                    std::to_string(bytes.size()),
                {std::to_string(entry.size), std::to_string(bytes.size())});
  }
  const auto digest = sha256_hex(bytes);
  if (digest != entry.sha256) {
    throw Error(Errc::ChecksumMismatch, entry.filename + ": expected sha256 " + entry.sha256 + ", got " + digest,
                {entry.sha256, digest});
  }
  write_file_atomic(final_path, bytes);
  return final_path;
}

std::vector<std::string> parse_sources(std::string_view text) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (start < text.size()) {
    auto end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    auto line = text.substr(start, end - start);
    start = end + 1;
    if (auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    auto url = trim(line);
    if (url.empty()) continue;
    if (!(url.starts_with("file://") || url.starts_with("http://") || url.starts_with("https://"))) {
      throw Error(Errc::TransportError, "unsupported repository URL: " + url);
    }
    out.push_back(std::move(url));
  }
  return out;
}

namespace {

fs::path home_dir() {
  if (const char* h = std::getenv("HOME"); h && *h) return h;
  return fs::current_path();
}

}  // namespace

fs::path default_sources_path() {
  if (const char* s = std::getenv("SDS_SOURCES"); s && *s) return s;
  return home_dir() / ".sds" / "sources";
}

fs::path default_cache_dir() {
  if (const char* s = std::getenv("SDS_CACHE"); s && *s) return s;
  return home_dir() / ".sds" / "cache";
}

}  // namespace sds

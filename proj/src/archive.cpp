#include "sds/archive.hpp"

#include <sys/stat.h>
#include <unistd.h>
#include <zlib.h>

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

#include "sds/error.hpp"
#include "sds/process.hpp"

namespace sds {

namespace {

constexpr std::size_t kBlock = 512;

struct RawHeader {
  char name[100];
  char mode[8];
  char uid[8];
  char gid[8];
  char size[12];
  char mtime[12];
  char chksum[8];
  char typeflag;
  char linkname[100];
  char magic[6];
  char version[2];
  char uname[32];
  char gname[32];
  char devmajor[8];
  char devminor[8];
  char prefix[155];
  char pad[12];
};
static_assert(sizeof(RawHeader) == kBlock);

void put_octal(char* field, std::size_t width, std::uint64_t value) {
  // width-1 digits followed by NUL
  std::string digits(width - 1, '0');
  for (std::size_t i = width - 1; i-- > 0 && value;) {
    digits[i] = static_cast<char>('0' + (value & 7));
    value >>= 3;
  }
  if (value) throw Error(Errc::IoError, "value too large for tar header field");
  std::memcpy(field, digits.data(), width - 1);
  field[width - 1] = '\0';
}

void put_string(char* field, std::size_t width, std::string_view s) {
  std::memcpy(field, s.data(), std::min(width, s.size()));
}

std::string header_block(std::string_view name, std::string_view prefix, char type,
                         std::uint32_t mode, std::uint64_t size, std::string_view linkname) {
  RawHeader h;
  std::memset(&h, 0, sizeof h);
  put_string(h.name, sizeof h.name, name);
  put_octal(h.mode, sizeof h.mode, mode & 07777);
  put_octal(h.uid, sizeof h.uid, 0);
  put_octal(h.gid, sizeof h.gid, 0);
  put_octal(h.size, sizeof h.size, size);
  put_octal(h.mtime, sizeof h.mtime, 0);
  h.typeflag = type;
  put_string(h.linkname, sizeof h.linkname, linkname);
  std::memcpy(h.magic, "ustar", 6);
  std::memcpy(h.version, "00", 2);
  put_octal(h.devmajor, sizeof h.devmajor, 0);
  put_octal(h.devminor, sizeof h.devminor, 0);
  put_string(h.prefix, sizeof h.prefix, prefix);

  std::memset(h.chksum, ' ', sizeof h.chksum);
  const auto* bytes = reinterpret_cast<const unsigned char*>(&h);
  unsigned sum = 0;
  for (std::size_t i = 0; i < kBlock; ++i) sum += bytes[i];
  char buf[8];
  std::snprintf(buf, sizeof buf, "%06o", sum);
  std::memcpy(h.chksum, buf, 6);
  h.chksum[6] = '\0';
  h.chksum[7] = ' ';
  return std::string(reinterpret_cast<const char*>(&h), kBlock);
}

void pad_to_block(std::string& out) {
  if (const auto r = out.size() % kBlock) out.append(kBlock - r, '\0');
}

// Splits a path over the ustar prefix/name fields when possible.
bool split_ustar(std::string_view path, std::string_view& prefix, std::string_view& name) {
  if (path.size() <= 100) {
    prefix = {};
    name = path;
    return true;
  }
  for (std::size_t i = path.size(); i-- > 0;) {
    if (path[i] != '/') continue;
    if (i <= 155 && path.size() - i - 1 <= 100 && path.size() - i - 1 > 0) {
      prefix = path.substr(0, i);
      name = path.substr(i + 1);
      return true;
    }
  }
  return false;
}

std::string_view field_str(const char* f, std::size_t width) {
  std::size_t n = 0;
  while (n < width && f[n] != '\0') ++n;
  return {f, n};
}

std::uint64_t parse_number(const char* f, std::size_t width) {
  const auto* u = reinterpret_cast<const unsigned char*>(f);
  if (u[0] & 0x80) {  // base-256
    std::uint64_t v = u[0] & 0x7f;
    for (std::size_t i = 1; i < width; ++i) v = (v << 8) | u[i];
    return v;
  }
  std::uint64_t v = 0;
  std::size_t i = 0;
  while (i < width && (f[i] == ' ' || f[i] == '\0')) ++i;
  bool any = false;
  for (; i < width && f[i] >= '0' && f[i] <= '7'; ++i) {
    v = (v << 3) | static_cast<std::uint64_t>(f[i] - '0');
    any = true;
  }
  for (; i < width; ++i) {
    if (f[i] != ' ' && f[i] != '\0') throw Error(Errc::CorruptArchive, "malformed numeric field in tar header");
  }
  if (!any && width != 0 && f[0] != '\0' && f[0] != ' ') {
    throw Error(Errc::CorruptArchive, "malformed numeric field in tar header");
  }
  return v;
}

bool checksum_ok(const RawHeader& h) {
  const auto stored = parse_number(h.chksum, sizeof h.chksum);
  RawHeader copy = h;
  std::memset(copy.chksum, ' ', sizeof copy.chksum);
  const auto* u = reinterpret_cast<const unsigned char*>(&copy);
  const auto* s = reinterpret_cast<const signed char*>(&copy);
  std::uint64_t usum = 0;
  std::int64_t ssum = 0;
  for (std::size_t i = 0; i < kBlock; ++i) {
    usum += u[i];
    ssum += s[i];
  }
  return stored == usum || static_cast<std::int64_t>(stored) == ssum;
}

std::string normalize_member_path(std::string p) {
  while (p.starts_with("./")) p.erase(0, 2);
  while (p.size() > 1 && p.back() == '/') p.pop_back();
  return p;
}

// pax extended header records: "<len> key=value\n"
void parse_pax(std::string_view data, std::string& path, std::string& linkpath) {
  std::size_t pos = 0;
  while (pos < data.size()) {
    const auto sp = data.find(' ', pos);
    if (sp == std::string_view::npos) break;
    std::size_t len = 0;
    for (std::size_t i = pos; i < sp; ++i) {
      if (data[i] < '0' || data[i] > '9') throw Error(Errc::CorruptArchive, "malformed pax header");
      len = len * 10 + static_cast<std::size_t>(data[i] - '0');
    }
    if (len == 0 || pos + len > data.size()) throw Error(Errc::CorruptArchive, "malformed pax header");
    auto record = data.substr(sp + 1, pos + len - sp - 1);
    if (!record.empty() && record.back() == '\n') record.remove_suffix(1);
    const auto eq = record.find('=');
    if (eq != std::string_view::npos) {
      const auto key = record.substr(0, eq);
      const auto value = record.substr(eq + 1);
      if (key == "path") path = std::string(value);
      if (key == "linkpath") linkpath = std::string(value);
    }
    pos += len;
  }
}

bool is_zero_block(const char* p) {
  return std::all_of(p, p + kBlock, [](char c) { return c == '\0'; });
}

std::atomic<unsigned> g_temp_counter{0};

}  // namespace

std::string write_tar(const std::vector<TarMember>& members) {
  std::string out;
  for (const auto& m : members) {
    std::string path = m.path;
    char type = '0';
    std::uint64_t size = m.data.size();
    if (m.type == TarMember::Type::directory) {
      path += '/';
      type = '5';
      size = 0;
    } else if (m.type == TarMember::Type::symlink) {
      type = '2';
      size = 0;
    }
    if (m.linkname.size() > 100) throw Error(Errc::IoError, "symlink target too long: " + m.path);
    std::string_view prefix;
    std::string_view name;
    if (!split_ustar(path, prefix, name)) {
      out += header_block("././@LongLink", {}, 'L', 0644, path.size() + 1, {});
      out += path;
      out += '\0';
      pad_to_block(out);
      prefix = {};
      name = std::string_view(path).substr(0, 100);
    }
    out += header_block(name, prefix, type, m.mode, size, m.linkname);
    if (type == '0') {
      out += m.data;
      pad_to_block(out);
    }
  }
  out.append(2 * kBlock, '\0');
  return out;
}

std::vector<TarMember> read_tar(std::string_view data) {
  std::vector<TarMember> members;
  std::string long_name;
  std::string long_link;
  std::string pax_path;
  std::string pax_link;
  std::size_t pos = 0;
  while (true) {
    if (pos + kBlock > data.size()) throw Error(Errc::CorruptArchive, "tar stream truncated");
    if (is_zero_block(data.data() + pos)) return members;
    RawHeader h;
    std::memcpy(&h, data.data() + pos, kBlock);
    pos += kBlock;
    if (!checksum_ok(h)) throw Error(Errc::CorruptArchive, "tar header checksum mismatch");
    const std::uint64_t size = parse_number(h.size, sizeof h.size);
    if (size > data.size() - pos) throw Error(Errc::CorruptArchive, "tar member data truncated");
    const std::string_view body = data.substr(pos, size);
    pos += (size + kBlock - 1) / kBlock * kBlock;
    if (pos > data.size()) throw Error(Errc::CorruptArchive, "tar member data truncated");

    switch (h.typeflag) {
      case 'L':
        long_name = std::string(field_str(body.data(), body.size()));
        continue;
      case 'K':
        long_link = std::string(field_str(body.data(), body.size()));
        continue;
      case 'x':
        parse_pax(body, pax_path, pax_link);
        continue;
      case 'g':
        continue;
      default:
        break;
    }

    std::string path;
    if (!long_name.empty()) {
      path = long_name;
    } else if (!pax_path.empty()) {
      path = pax_path;
    } else {
      const auto prefix = field_str(h.prefix, sizeof h.prefix);
      const auto name = field_str(h.name, sizeof h.name);
      const bool ustar = std::memcmp(h.magic, "ustar", 5) == 0;
      path = (ustar && !prefix.empty()) ? std::string(prefix) + "/" + std::string(name) : std::string(name);
    }
    std::string link = !long_link.empty() ? long_link
                       : !pax_link.empty() ? pax_link
                                           : std::string(field_str(h.linkname, sizeof h.linkname));
    long_name.clear();
    long_link.clear();
    pax_path.clear();
    pax_link.clear();

    TarMember m;
    m.path = normalize_member_path(path);
    m.mode = static_cast<std::uint32_t>(parse_number(h.mode, sizeof h.mode) & 07777);
    if (m.path.empty()) throw Error(Errc::CorruptArchive, "tar member with empty path");
    switch (h.typeflag) {
      case '0':
      case '\0':
      case '7':
        m.type = TarMember::Type::file;
        m.data = std::string(body);
        break;
      case '5':
        m.type = TarMember::Type::directory;
        break;
      case '2':
        m.type = TarMember::Type::symlink;
        m.linkname = link;
        break;
      case '1': {
        // hard link: materialize as a copy of the earlier member
        const auto target = normalize_member_path(link);
        auto it = std::find_if(members.rbegin(), members.rend(),
                               [&](const TarMember& x) { return x.path == target; });
        if (it == members.rend()) throw Error(Errc::CorruptArchive, "hard link to unknown member " + link);
        m.type = TarMember::Type::file;
        m.data = it->data;
        break;
      }
      default:
        continue;  // devices, fifos
    }
    members.push_back(std::move(m));
  }
}

bool looks_gzipped(std::string_view data) noexcept {
  return data.size() >= 2 && static_cast<unsigned char>(data[0]) == 0x1f &&
         static_cast<unsigned char>(data[1]) == 0x8b;
}

std::string gzip_compress(std::string_view data) {
  z_stream zs{};
  if (deflateInit2(&zs, 9, Z_DEFLATED, 15 + 16, 8, Z_DEFAULT_STRATEGY) != Z_OK) {
    throw Error(Errc::IoError, "deflateInit2 failed");
  }
  std::string out;
  out.resize(deflateBound(&zs, static_cast<uLong>(data.size())) + 32);
  zs.next_in = reinterpret_cast<Bytef*>(const_cast<char*>(data.data()));
  zs.avail_in = static_cast<uInt>(data.size());
  zs.next_out = reinterpret_cast<Bytef*>(out.data());
  zs.avail_out = static_cast<uInt>(out.size());
  const int rc = deflate(&zs, Z_FINISH);
  const auto produced = zs.total_out;
  deflateEnd(&zs);
  if (rc != Z_STREAM_END) throw Error(Errc::IoError, "gzip compression failed");
  out.resize(produced);
  return out;
}

std::string gzip_decompress(std::string_view data) {
  if (!looks_gzipped(data)) throw Error(Errc::CorruptArchive, "not a gzip stream");
  std::string out;
  std::size_t offset = 0;
  while (offset < data.size()) {
    const auto rest = data.substr(offset);
    if (!looks_gzipped(rest)) {
      if (std::all_of(rest.begin(), rest.end(), [](char c) { return c == '\0'; })) break;
      throw Error(Errc::CorruptArchive, "trailing garbage after gzip stream");
    }
    z_stream zs{};
    if (inflateInit2(&zs, 15 + 16) != Z_OK) throw Error(Errc::IoError, "inflateInit2 failed");
    zs.next_in = reinterpret_cast<Bytef*>(const_cast<char*>(rest.data()));
    zs.avail_in = static_cast<uInt>(rest.size());
    char buf[1 << 16];
    int rc = Z_OK;
    while (rc == Z_OK) {
      zs.next_out = reinterpret_cast<Bytef*>(buf);
      zs.avail_out = sizeof buf;
      rc = inflate(&zs, Z_NO_FLUSH);
      if (rc == Z_OK || rc == Z_STREAM_END) out.append(buf, sizeof buf - zs.avail_out);
      if (rc == Z_BUF_ERROR && zs.avail_in == 0) break;
    }
    const auto consumed = zs.total_in;
    inflateEnd(&zs);
    if (rc != Z_STREAM_END) throw Error(Errc::CorruptArchive, "corrupt or truncated gzip stream");
    offset += consumed;
  }
  return out;
}

std::vector<TarMember> collect_tree(const fs::path& root, const std::string& prefix,
                                    bool allow_symlinks) {
  std::vector<TarMember> members;
  std::error_code ec;
  auto perms_of = [](const fs::path& p) {
    return static_cast<std::uint32_t>(fs::symlink_status(p).permissions() & fs::perms::mask);
  };
  if (!prefix.empty()) {
    members.push_back({prefix, TarMember::Type::directory, perms_of(root), {}, {}});
  }
  fs::recursive_directory_iterator it(root, ec);
  if (ec) throw Error(Errc::IoError, "cannot read " + root.string() + ": " + ec.message());
  for (const auto& entry : it) {
    const auto rel = entry.path().lexically_relative(root).generic_string();
    const auto path = prefix.empty() ? rel : prefix + "/" + rel;
    TarMember m;
    m.path = path;
    m.mode = perms_of(entry.path());
    if (entry.is_symlink()) {
      if (!allow_symlinks) throw Error(Errc::IoError, "symbolic links are not supported in packages: " + rel);
      m.type = TarMember::Type::symlink;
      m.linkname = fs::read_symlink(entry.path()).string();
    } else if (entry.is_directory()) {
      m.type = TarMember::Type::directory;
    } else if (entry.is_regular_file()) {
      m.type = TarMember::Type::file;
      m.data = read_file_bytes(entry.path());
    } else {
      throw Error(Errc::IoError, "unsupported file type: " + rel);
    }
    members.push_back(std::move(m));
  }
  std::sort(members.begin(), members.end(),
            [](const TarMember& a, const TarMember& b) { return a.path < b.path; });
  return members;
}

void check_member_path(const std::string& path) {
  if (path.empty() || path.front() == '/') {
    throw Error(Errc::PathTraversal, "absolute archive member path: " + path, {path});
  }
  std::size_t start = 0;
  while (start <= path.size()) {
    auto end = path.find('/', start);
    if (end == std::string::npos) end = path.size();
    if (path.compare(start, end - start, "..") == 0 && end - start == 2) {
      throw Error(Errc::PathTraversal, "archive member escapes destination: " + path, {path});
    }
    start = end + 1;
  }
}

namespace {

// Refuses to write through a symlink planted by an earlier member.
void check_no_symlink_parent(const fs::path& dest, const std::string& rel) {
  fs::path cur = dest;
  const fs::path relp(rel);
  auto last = std::prev(relp.end());
  for (auto it = relp.begin(); it != relp.end() && it != last; ++it) {
    cur /= *it;
    std::error_code ec;
    if (fs::is_symlink(fs::symlink_status(cur, ec))) {
      throw Error(Errc::PathTraversal, "archive member writes through a symlink: " + rel, {rel});
    }
  }
}

}  // namespace

void extract_members(const std::vector<TarMember>& members, const fs::path& dest, ExtractOptions opts) {
  for (const auto& m : members) check_member_path(m.path);
  std::error_code ec;
  fs::create_directories(dest, ec);
  if (ec) throw Error(Errc::IoError, "cannot create " + dest.string() + ": " + ec.message());

  std::vector<std::pair<fs::path, std::uint32_t>> dir_modes;
  for (const auto& m : members) {
    check_no_symlink_parent(dest, m.path);
    const fs::path target = dest / m.path;
    fs::create_directories(target.parent_path(), ec);
    if (ec) throw Error(Errc::IoError, "cannot create " + target.parent_path().string() + ": " + ec.message());
    switch (m.type) {
      case TarMember::Type::directory:
        if (fs::is_symlink(fs::symlink_status(target, ec))) {
          throw Error(Errc::PathTraversal, "directory member replaces a symlink: " + m.path, {m.path});
        }
        fs::create_directories(target, ec);
        if (ec) throw Error(Errc::IoError, "cannot create " + target.string() + ": " + ec.message());
        dir_modes.emplace_back(target, m.mode);
        break;
      case TarMember::Type::file: {
        fs::remove(target, ec);
        std::ofstream f(target, std::ios::binary | std::ios::trunc);
        f.write(m.data.data(), static_cast<std::streamsize>(m.data.size()));
        if (!f) throw Error(Errc::IoError, "cannot write " + target.string());
        f.close();
        fs::permissions(target, static_cast<fs::perms>(m.mode), ec);
        break;
      }
      case TarMember::Type::symlink:
        if (!opts.allow_symlinks) {
          throw Error(Errc::CorruptArchive, "symbolic link members are not allowed: " + m.path);
        }
        fs::remove(target, ec);
        fs::create_symlink(m.linkname, target, ec);
        if (ec) throw Error(Errc::IoError, "cannot create symlink " + target.string() + ": " + ec.message());
        break;
    }
  }
  // deepest first so read-only parents do not block their children
  std::sort(dir_modes.begin(), dir_modes.end(),
            [](const auto& a, const auto& b) { return a.first.string() > b.first.string(); });
  for (const auto& [dir, mode] : dir_modes) {
    fs::permissions(dir, static_cast<fs::perms>(mode | 0700), ec);
  }
}

void extract_tarball(const fs::path& tarball, const fs::path& dest) {
  const std::string bytes = read_file_bytes(tarball);
  const bool ustar = bytes.size() >= 262 && bytes.compare(257, 5, "ustar") == 0;
  if (looks_gzipped(bytes)) {
    extract_members(read_tar(gzip_decompress(bytes)), dest, {.allow_symlinks = true});
    return;
  }
  if (ustar) {
    extract_members(read_tar(bytes), dest, {.allow_symlinks = true});
    return;
  }
  std::error_code ec;
  fs::create_directories(dest, ec);
  auto env = current_environment();
  const auto log = dest.parent_path() / (dest.filename().string() + ".untar.log");
  const auto r = run_process({"tar", "-xf", fs::absolute(tarball).string()}, env, dest, log);
  fs::remove(log, ec);
  if (r.exit_status != 0) {
    throw Error(Errc::CorruptArchive, "cannot unpack " + tarball.string() + " (tar exit " +
                                          std::to_string(r.exit_status) + ")");
  }
}

std::string read_file_bytes(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  if (!f) throw Error(Errc::IoError, "cannot read " + p.string());
  std::ostringstream ss;
  ss << f.rdbuf();
  if (f.bad()) throw Error(Errc::IoError, "cannot read " + p.string());
  return std::move(ss).str();
}

void write_file_atomic(const fs::path& p, std::string_view bytes) {
  const fs::path tmp = p.parent_path() / ("." + p.filename().string() + ".tmp." +
                                          std::to_string(::getpid()) + "." +
                                          std::to_string(g_temp_counter++));
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    f.flush();
    if (!f) {
      std::error_code ec;
      fs::remove(tmp, ec);
      throw Error(Errc::IoError, "cannot write " + tmp.string());
    }
  }
  std::error_code ec;
  fs::rename(tmp, p, ec);
  if (ec) {
    fs::remove(tmp, ec);
    throw Error(Errc::IoError, "cannot rename into " + p.string());
  }
}

}  // namespace sds

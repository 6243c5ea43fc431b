#include "sds/install_db.hpp"

#include <fcntl.h>
#include <sys/file.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <cstring>
#include <ctime>
#include <fstream>

#include "sds/archive.hpp"
#include "sds/error.hpp"

namespace sds {

namespace {

std::string trim(std::string_view s) {
  const auto ws = " \t\r";
  const auto b = s.find_first_not_of(ws);
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(ws);
  return std::string(s.substr(b, e - b + 1));
}

[[noreturn]] void corrupt(const std::string& source, const std::string& why) {
  throw Error(Errc::CorruptRecord, "corrupt install record " + source + ": " + why, {source});
}

void create_dirs(const fs::path& p) {
  std::error_code ec;
  fs::create_directories(p, ec);
  if (!ec) return;
  if (ec == std::errc::permission_denied || ec == std::errc::read_only_file_system) {
    throw Error(Errc::PermissionDenied, "permission denied creating " + p.string());
  }
  if (ec == std::errc::not_a_directory || ec == std::errc::file_exists) {
    throw Error(Errc::NotADirectory, p.string() + " is not a directory");
  }
  throw Error(Errc::IoError, "cannot create " + p.string() + ": " + ec.message());
}

}  // namespace

bool operator==(const InstallRecord& a, const InstallRecord& b) {
  if (a.name != b.name || a.version.str() != b.version.str() || !(a.platform == b.platform) ||
      a.installed_at != b.installed_at || a.origin != b.origin || a.extra_fields != b.extra_fields ||
      a.resolved_deps.size() != b.resolved_deps.size()) {
    return false;
  }
  for (std::size_t i = 0; i < a.resolved_deps.size(); ++i) {
    if (a.resolved_deps[i].first != b.resolved_deps[i].first ||
        a.resolved_deps[i].second.str() != b.resolved_deps[i].second.str()) {
      return false;
    }
  }
  return true;
}

std::string format_timestamp(std::chrono::system_clock::time_point t) {
  const std::time_t tt = std::chrono::system_clock::to_time_t(
      std::chrono::floor<std::chrono::seconds>(t));
  std::tm tm{};
  ::gmtime_r(&tt, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::chrono::system_clock::time_point parse_timestamp(std::string_view text) {
  std::tm tm{};
  char z = 0;
  const std::string s(text);
  int n = std::sscanf(s.c_str(), "%4d-%2d-%2dT%2d:%2d:%2d%c", &tm.tm_year, &tm.tm_mon, &tm.tm_mday,
                      &tm.tm_hour, &tm.tm_min, &tm.tm_sec, &z);
  if (n != 7 || z != 'Z' || s.size() != 20) {
    throw Error(Errc::CorruptRecord, "bad timestamp '" + s + "'");
  }
  tm.tm_year -= 1900;
  tm.tm_mon -= 1;
  return std::chrono::system_clock::from_time_t(::timegm(&tm));
}

std::string render_record(const InstallRecord& r) {
  std::string out;
  out += "Name: " + r.name + "\n";
  out += "Version: " + r.version.str() + "\n";
  out += "Platform: " + r.platform.str() + "\n";
  out += "InstalledAt: " + format_timestamp(r.installed_at) + "\n";
  out += "Origin: " + r.origin + "\n";
  std::string deps;
  for (const auto& [n, v] : r.resolved_deps) {
    if (!deps.empty()) deps += ", ";
    deps += n + "=" + v.str();
  }
  out += "Depends:" + (deps.empty() ? std::string() : " " + deps) + "\n";
  for (const auto& [k, v] : r.extra_fields) out += k + ": " + v + "\n";
  return out;
}

InstallRecord parse_record(std::string_view text, const std::string& source) {
  InstallRecord r;
  bool have_name = false, have_version = false, have_platform = false, have_time = false,
       have_origin = false;
  std::size_t start = 0;
  std::size_t line_no = 0;
  while (start < text.size()) {
    auto end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    ++line_no;
    const auto line = text.substr(start, end - start);
    start = end + 1;
    if (trim(line).empty()) continue;
    const auto colon = line.find(':');
    if (colon == std::string_view::npos || colon == 0) {
      corrupt(source, "line " + std::to_string(line_no) + " is not 'Field: value'");
    }
    const std::string key(line.substr(0, colon));
    const std::string value = trim(line.substr(colon + 1));
    try {
      if (key == "Name") {
        r.name = value;
        have_name = is_valid_package_name(value);
      } else if (key == "Version") {
        r.version = Version::parse(value);
        have_version = true;
      } else if (key == "Platform") {
        r.platform = Platform::parse(value);
        have_platform = true;
      } else if (key == "InstalledAt") {
        r.installed_at = parse_timestamp(value);
        have_time = true;
      } else if (key == "Origin") {
        r.origin = value;
        have_origin = true;
      } else if (key == "Depends") {
        std::size_t p = 0;
        while (p < value.size()) {
          auto comma = value.find(',', p);
          if (comma == std::string::npos) comma = value.size();
          const auto item = trim(std::string_view(value).substr(p, comma - p));
          const auto eq = item.find('=');
          if (eq == std::string::npos) corrupt(source, "bad Depends item '" + item + "'");
          r.resolved_deps.emplace_back(item.substr(0, eq), Version::parse(item.substr(eq + 1)));
          p = comma + 1;
        }
      } else {
        r.extra_fields.emplace_back(key, value);
      }
    } catch (const Error& e) {
      if (e.code() == Errc::CorruptRecord && !e.details().empty()) throw;
      corrupt(source, "field " + key + ": " + e.what());
    }
  }
  if (!have_name || !have_version || !have_platform || !have_time || !have_origin) {
    corrupt(source, "missing required field");
  }
  return r;
}

PrefixLock::PrefixLock(const fs::path& lock_file) {
  fd_ = ::open(lock_file.c_str(), O_RDWR | O_CREAT | O_CLOEXEC, 0644);
  if (fd_ < 0) {
    const int err = errno;
    if (err == EACCES || err == EROFS) throw Error(Errc::PermissionDenied, "cannot open " + lock_file.string());
    throw Error(Errc::IoError, "cannot open " + lock_file.string() + ": " + std::strerror(err));
  }
  if (::flock(fd_, LOCK_EX | LOCK_NB) != 0) {
    const int err = errno;
    ::close(fd_);
    fd_ = -1;
    if (err == EWOULDBLOCK) {
      throw Error(Errc::LockHeld, "another installation holds " + lock_file.string());
    }
    throw Error(Errc::IoError, "cannot lock " + lock_file.string() + ": " + std::strerror(err));
  }
}

PrefixLock::~PrefixLock() {
  if (fd_ >= 0) {
    ::flock(fd_, LOCK_UN);
    ::close(fd_);
  }
}

InstallPrefix InstallPrefix::init(const fs::path& path) {
  std::error_code ec;
  const auto st = fs::status(path, ec);
  if (fs::exists(st) && !fs::is_directory(st)) {
    throw Error(Errc::NotADirectory, path.string() + " is not a directory");
  }
  InstallPrefix prefix(fs::absolute(path).lexically_normal());
  create_dirs(prefix.db_dir());
  if (!fs::exists(prefix.lock_file(), ec)) {
    std::ofstream touch(prefix.lock_file(), std::ios::app);
    if (!touch) throw Error(Errc::PermissionDenied, "cannot create " + prefix.lock_file().string());
  }
  return prefix;
}

InstallPrefix InstallPrefix::open(const fs::path& path) {
  std::error_code ec;
  const auto st = fs::status(path, ec);
  if (fs::exists(st) && !fs::is_directory(st)) {
    throw Error(Errc::NotADirectory, path.string() + " is not a directory");
  }
  return InstallPrefix(fs::absolute(path).lexically_normal());
}

std::optional<InstallRecord> InstallPrefix::query(const std::string& name) const {
  if (!is_valid_package_name(name)) return std::nullopt;
  const auto file = db_dir() / name;
  std::error_code ec;
  if (!fs::exists(file, ec)) return std::nullopt;
  std::string text;
  try {
    text = read_file_bytes(file);
  } catch (const Error&) {
    corrupt(file.string(), "unreadable");
  }
  auto r = parse_record(text, file.string());
  if (r.name != name) corrupt(file.string(), "Name field '" + r.name + "' does not match file name");
  return r;
}

std::vector<InstallRecord> InstallPrefix::list() const {
  std::vector<InstallRecord> out;
  std::error_code ec;
  if (!fs::is_directory(db_dir(), ec)) return out;
  std::vector<std::string> names;
  for (const auto& e : fs::directory_iterator(db_dir(), ec)) {
    const auto n = e.path().filename().string();
    if (!n.starts_with(".") && e.is_regular_file()) names.push_back(n);
  }
  std::sort(names.begin(), names.end());
  for (const auto& n : names) {
    if (auto r = query(n)) out.push_back(std::move(*r));
  }
  return out;
}

void InstallPrefix::register_record(const InstallRecord& record, RegisterMode mode) const {
  if (!is_valid_package_name(record.name)) {
    throw Error(Errc::InvalidName, "invalid package name '" + record.name + "'");
  }
  create_dirs(db_dir());
  const auto file = db_dir() / record.name;
  InstallRecord to_write = record;
  const auto existing = query(record.name);
  if (existing) {
    if (mode == RegisterMode::fresh) {
      throw Error(Errc::AlreadyRegistered,
                  record.name + " " + existing->version.str() + " is already registered in " +
                      path_.string(),
                  {record.name, existing->version.str()});
    }
    for (const auto& field : existing->extra_fields) {
      const bool present = std::any_of(to_write.extra_fields.begin(), to_write.extra_fields.end(),
                                       [&](const auto& f) { return f.first == field.first; });
      if (!present) to_write.extra_fields.push_back(field);
    }
  }

  const auto text = render_record(to_write);
  const auto tmp = db_dir() / ("." + record.name + ".tmp." + std::to_string(::getpid()));
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    f << text;
    f.flush();
    if (!f) throw Error(Errc::IoError, "cannot write " + tmp.string());
  }
  std::error_code ec;
  try {
    if (before_commit) before_commit();
  } catch (...) {
    fs::remove(tmp, ec);
    throw;
  }
  fs::rename(tmp, file, ec);
  if (ec) {
    fs::remove(tmp, ec);
    throw Error(Errc::IoError, "cannot commit record " + file.string());
  }
}

Verdict InstallPrefix::satisfies(const DependencyClause& clause) const {
  const auto record = query(clause.name);
  if (!record) return {Verdict::Kind::absent, std::nullopt};
  if (clause.accepts(record->version)) return {Verdict::Kind::satisfied, record->version};
  return {Verdict::Kind::violating, record->version};
}

}  // namespace sds

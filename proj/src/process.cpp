#include "sds/process.hpp"

#include <fcntl.h>
#include <signal.h>
#include <sys/stat.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>
#include <thread>

#include "sds/error.hpp"

extern char** environ;

namespace sds {

Environment current_environment() {
  Environment env;
  for (char** e = environ; e && *e; ++e) {
    std::string_view kv(*e);
    const auto eq = kv.find('=');
    if (eq == std::string_view::npos) continue;
    env.emplace(std::string(kv.substr(0, eq)), std::string(kv.substr(eq + 1)));
  }
  return env;
}

bool is_executable_file(const fs::path& p) {
  std::error_code ec;
  const auto st = fs::status(p, ec);
  if (ec || !fs::is_regular_file(st)) return false;
  return ::access(p.c_str(), X_OK) == 0;
}

std::optional<fs::path> find_in_path(const std::string& program, const std::string& path_var) {
  std::size_t start = 0;
  while (start <= path_var.size()) {
    auto end = path_var.find(':', start);
    if (end == std::string::npos) end = path_var.size();
    const std::string dir = path_var.substr(start, end - start);
    const fs::path candidate = fs::path(dir.empty() ? "." : dir) / program;
    if (is_executable_file(candidate)) return candidate;
    start = end + 1;
  }
  return std::nullopt;
}

ProcessResult run_process(const std::vector<std::string>& argv, const Environment& env,
                          const fs::path& cwd, const fs::path& log,
                          std::optional<std::chrono::milliseconds> timeout) {
  if (argv.empty()) throw Error(Errc::IoError, "run_process: empty argv");

  fs::path program = argv[0];
  if (argv[0].find('/') == std::string::npos) {
    const auto it = env.find("PATH");
    auto found = find_in_path(argv[0], it == env.end() ? std::string("/usr/bin:/bin") : it->second);
    if (!found) return ProcessResult{127, false};
    program = *found;
  }

  std::error_code ec;
  if (!log.parent_path().empty()) fs::create_directories(log.parent_path(), ec);
  const int log_fd = ::open(log.c_str(), O_WRONLY | O_CREAT | O_APPEND | O_CLOEXEC, 0644);
  if (log_fd < 0) throw Error(Errc::IoError, "cannot open log " + log.string() + ": " + std::strerror(errno));

  std::vector<std::string> env_strings;
  env_strings.reserve(env.size());
  for (const auto& [k, v] : env) env_strings.push_back(k + "=" + v);
  std::vector<char*> envp;
  for (auto& s : env_strings) envp.push_back(s.data());
  envp.push_back(nullptr);

  std::vector<std::string> args = argv;
  std::vector<char*> argp;
  for (auto& a : args) argp.push_back(a.data());
  argp.push_back(nullptr);

  std::string sh_arg0 = "sh";
  std::string prog_str = program.string();
  std::vector<char*> sh_argp{sh_arg0.data(), prog_str.data()};
  for (std::size_t i = 1; i < args.size(); ++i) sh_argp.push_back(args[i].data());
  sh_argp.push_back(nullptr);

  const pid_t pid = ::fork();
  if (pid < 0) {
    ::close(log_fd);
    throw Error(Errc::IoError, std::string("fork failed: ") + std::strerror(errno));
  }
  if (pid == 0) {
    ::setpgid(0, 0);
    const int devnull = ::open("/dev/null", O_RDONLY);
    if (devnull >= 0) ::dup2(devnull, STDIN_FILENO);
    ::dup2(log_fd, STDOUT_FILENO);
    ::dup2(log_fd, STDERR_FILENO);
    if (::chdir(cwd.c_str()) != 0) {
      const char msg[] = "sds: cannot change to working directory\n";
      (void)!::write(STDERR_FILENO, msg, sizeof msg - 1);
      ::_exit(127);
    }
    ::execve(prog_str.c_str(), argp.data(), envp.data());
    if (errno == ENOEXEC) ::execve("/bin/sh", sh_argp.data(), envp.data());
    const char msg[] = "sds: exec failed\n";
    (void)!::write(STDERR_FILENO, msg, sizeof msg - 1);
    ::_exit(126);
  }
  ::close(log_fd);

  ProcessResult result;
  int status = 0;
  if (!timeout) {
    while (::waitpid(pid, &status, 0) < 0 && errno == EINTR) {
    }
  } else {
    const auto deadline = std::chrono::steady_clock::now() + *timeout;
    while (true) {
      const pid_t r = ::waitpid(pid, &status, WNOHANG);
      if (r == pid) break;
      if (r < 0 && errno != EINTR) break;
      if (std::chrono::steady_clock::now() >= deadline) {
        ::kill(-pid, SIGKILL);
        ::kill(pid, SIGKILL);
        while (::waitpid(pid, &status, 0) < 0 && errno == EINTR) {
        }
        result.timed_out = true;
        break;
      }
      std::this_thread::sleep_for(std::chrono::milliseconds(5));
    }
  }
  if (WIFEXITED(status)) {
    result.exit_status = WEXITSTATUS(status);
  } else if (WIFSIGNALED(status)) {
    result.exit_status = 128 + WTERMSIG(status);
  }
  return result;
}

}  // namespace sds

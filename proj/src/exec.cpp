#include "esekit/exec.hpp"

#include <fcntl.h>
#include <grp.h>
#include <poll.h>
#include <sched.h>
#include <signal.h>
#include <sys/resource.h>
#include <sys/stat.h>
#include <sys/syscall.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <cstring>
#include <filesystem>

#include "esekit/error.hpp"
#include "esekit/util.hpp"

namespace esekit {

namespace fs = std::filesystem;

namespace {

constexpr uid_t kSandboxUid = 65534;  // nobody
constexpr gid_t kSandboxGid = 65534;
constexpr std::size_t kStderrCap = 64 * 1024;

std::string_view equivalence_name(ErrorEquivalence e) {
  return e == ErrorEquivalence::Coarse ? "coarse" : "exit_code";
}

bool is_space(char c) {
  return c == ' ' || c == '\t' || c == '\r' || c == '\v' || c == '\f';
}

std::size_t count_placeholders(const std::vector<std::string>& argv) {
  std::size_t n = 0;
  for (const auto& a : argv) {
    for (std::size_t pos = a.find(kProgramPlaceholder); pos != std::string::npos;
         pos = a.find(kProgramPlaceholder, pos + 1)) {
      ++n;
    }
  }
  return n;
}

std::vector<std::string> substitute(const std::vector<std::string>& argv,
                                    const std::string& program_path) {
  std::vector<std::string> out;
  out.reserve(argv.size());
  for (auto a : argv) {
    for (std::size_t pos = a.find(kProgramPlaceholder); pos != std::string::npos;
         pos = a.find(kProgramPlaceholder, pos + program_path.size())) {
      a.replace(pos, kProgramPlaceholder.size(), program_path);
    }
    out.push_back(std::move(a));
  }
  return out;
}

bool sandbox_drops_privileges(const LanguageProfile& p) {
  return p.drop_privileges && geteuid() == 0;
}

// Temp directory removed on scope exit.
class ScratchDir {
 public:
  ScratchDir(const std::string& parent, const char* prefix, bool chown_to_sandbox) {
    std::string templ = parent + "/" + prefix + "XXXXXX";
    std::vector<char> buf(templ.begin(), templ.end());
    buf.push_back('\0');
    if (!mkdtemp(buf.data())) {
      fail_environment("sandbox: cannot create scratch directory under '" +
                       parent + "': " + std::strerror(errno));
    }
    path_ = buf.data();
    ::chmod(path_.c_str(), 0755);
    if (chown_to_sandbox && ::chown(path_.c_str(), kSandboxUid, kSandboxGid) != 0) {
      fail_environment("sandbox: cannot hand scratch directory to uid " +
                       std::to_string(kSandboxUid));
    }
  }
  ~ScratchDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  ScratchDir(const ScratchDir&) = delete;
  ScratchDir& operator=(const ScratchDir&) = delete;

  const std::string& path() const { return path_; }

 private:
  std::string path_;
};

void set_nonblocking(int fd) {
  ::fcntl(fd, F_SETFL, ::fcntl(fd, F_GETFL) | O_NONBLOCK);
}

struct Pipe {
  int fd[2] = {-1, -1};
  Pipe() {
    if (::pipe2(fd, O_CLOEXEC) != 0) {
      fail_environment(std::string("sandbox: pipe failed: ") + std::strerror(errno));
    }
  }
  ~Pipe() {
    close_read();
    close_write();
  }
  void close_read() {
    if (fd[0] >= 0) ::close(fd[0]);
    fd[0] = -1;
  }
  void close_write() {
    if (fd[1] >= 0) ::close(fd[1]);
    fd[1] = -1;
  }
};

std::int64_t now_ms() {
  return std::chrono::duration_cast<std::chrono::milliseconds>(
             std::chrono::steady_clock::now().time_since_epoch())
      .count();
}

}  // namespace

// ---- profiles -------------------------------------------------------------

void validate(const LanguageProfile& p) {
  if (p.profile_id.empty()) {
    throw ValidationError("profile_id_nonempty", "language profile without id");
  }
  if (p.wall_timeout_ms <= 0) {
    throw ValidationError("wall_timeout_positive",
                          "profile '" + p.profile_id + "' has wall_timeout " +
                              std::to_string(p.wall_timeout_ms));
  }
  if (p.run_command.empty() || count_placeholders(p.run_command) != 1) {
    throw ValidationError("single_program_placeholder",
                          "profile '" + p.profile_id +
                              "' run_command must contain exactly one {program}");
  }
  if (p.max_output_bytes <= 0 || p.memory_limit_bytes <= 0) {
    throw ValidationError("limits_positive",
                          "profile '" + p.profile_id + "' has a non-positive limit");
  }
  if (p.program_filename.empty() ||
      p.program_filename.find('/') != std::string::npos) {
    throw ValidationError("program_filename",
                          "profile '" + p.profile_id +
                              "' program_filename must be a bare file name");
  }
}

void to_json(Json& j, const LanguageProfile& p) {
  j = Json{{"profile_id", p.profile_id},
           {"syntax_check_command", p.syntax_check_command},
           {"run_command", p.run_command},
           {"program_filename", p.program_filename},
           {"wall_timeout_ms", p.wall_timeout_ms},
           {"memory_limit_bytes", p.memory_limit_bytes},
           {"max_output_bytes", p.max_output_bytes},
           {"max_processes", p.max_processes},
           {"error_equivalence", equivalence_name(p.error_equivalence)},
           {"drop_privileges", p.drop_privileges},
           {"isolate_network", p.isolate_network}};
}

void from_json(const Json& j, LanguageProfile& p) {
  LanguageProfile d;
  p.profile_id = j.at("profile_id").get<std::string>();
  p.syntax_check_command =
      j.value("syntax_check_command", std::vector<std::string>{});
  p.run_command = j.at("run_command").get<std::vector<std::string>>();
  p.program_filename = j.value("program_filename", d.program_filename);
  p.wall_timeout_ms = j.value("wall_timeout_ms", d.wall_timeout_ms);
  p.memory_limit_bytes = j.value("memory_limit_bytes", d.memory_limit_bytes);
  p.max_output_bytes = j.value("max_output_bytes", d.max_output_bytes);
  p.max_processes = j.value("max_processes", d.max_processes);
  const std::string eq = j.value("error_equivalence", std::string("coarse"));
  if (eq == "coarse") {
    p.error_equivalence = ErrorEquivalence::Coarse;
  } else if (eq == "exit_code") {
    p.error_equivalence = ErrorEquivalence::ExitCode;
  } else {
    throw ValidationError("error_equivalence",
                          "unknown error_equivalence '" + eq + "'");
  }
  p.drop_privileges = j.value("drop_privileges", d.drop_privileges);
  p.isolate_network = j.value("isolate_network", d.isolate_network);
}

std::map<std::string, LanguageProfile> builtin_profiles() {
  std::map<std::string, LanguageProfile> out;
  LanguageProfile py;
  py.profile_id = "python3";
  py.syntax_check_command = {
      "python3", "-c",
      "import ast,sys; ast.parse(open(sys.argv[1],'rb').read(), sys.argv[1])",
      "{program}"};
  py.run_command = {"python3", "{program}"};
  py.program_filename = "main.py";
  py.wall_timeout_ms = 4000;
  out.emplace(py.profile_id, py);

  LanguageProfile sh;
  sh.profile_id = "sh";
  sh.syntax_check_command = {"sh", "-n", "{program}"};
  sh.run_command = {"sh", "{program}"};
  sh.program_filename = "main.sh";
  sh.wall_timeout_ms = 2000;
  sh.memory_limit_bytes = std::int64_t{256} << 20;
  out.emplace(sh.profile_id, sh);
  return out;
}

std::map<std::string, LanguageProfile> load_profiles(const std::string& path) {
  auto out = builtin_profiles();
  Json j;
  try {
    j = Json::parse(read_file(path));
  } catch (const Json::parse_error& e) {
    fail_domain("profiles file '" + path + "': " + e.what());
  }
  if (j.contains("schema_version") && j["schema_version"] != kSchemaVersion) {
    throw ValidationError("schema_version", "profiles file '" + path +
                                                "' has unsupported schema_version");
  }
  try {
    for (const auto& pj : j.at("profiles")) {
      LanguageProfile p = pj.get<LanguageProfile>();
      validate(p);
      out[p.profile_id] = std::move(p);
    }
  } catch (const Json::exception& e) {
    fail_domain("profiles file '" + path + "': " + e.what());
  }
  return out;
}

// ---- outcomes -------------------------------------------------------------

std::string_view to_string(OutcomeKind k) {
  switch (k) {
    case OutcomeKind::Output: return "output";
    case OutcomeKind::Timeout: return "timeout";
    case OutcomeKind::RuntimeError: return "runtime_error";
    case OutcomeKind::OutputTruncated: return "output_truncated";
  }
  return "output";
}

TestOutcome TestOutcome::output(std::string normalized_payload) {
  return TestOutcome{OutcomeKind::Output, std::move(normalized_payload), 0};
}
TestOutcome TestOutcome::timeout() {
  return TestOutcome{OutcomeKind::Timeout, std::nullopt, std::nullopt};
}
TestOutcome TestOutcome::runtime_error(std::optional<int> exit_code) {
  return TestOutcome{OutcomeKind::RuntimeError, std::nullopt, exit_code};
}
TestOutcome TestOutcome::truncated() {
  return TestOutcome{OutcomeKind::OutputTruncated, std::nullopt, std::nullopt};
}

void to_json(Json& j, const TestOutcome& o) {
  j = Json{{"kind", to_string(o.kind)}};
  if (o.payload) j["payload"] = *o.payload;
  if (o.exit_code) j["exit_code"] = *o.exit_code;
}

void from_json(const Json& j, TestOutcome& o) {
  const std::string kind = j.at("kind").get<std::string>();
  if (kind == "output") {
    o.kind = OutcomeKind::Output;
  } else if (kind == "timeout") {
    o.kind = OutcomeKind::Timeout;
  } else if (kind == "runtime_error") {
    o.kind = OutcomeKind::RuntimeError;
  } else if (kind == "output_truncated") {
    o.kind = OutcomeKind::OutputTruncated;
  } else {
    throw ValidationError("outcome_kind", "unknown outcome kind '" + kind + "'");
  }
  o.payload = j.contains("payload")
                  ? std::optional<std::string>(j["payload"].get<std::string>())
                  : std::nullopt;
  o.exit_code = j.contains("exit_code")
                    ? std::optional<int>(j["exit_code"].get<int>())
                    : std::nullopt;
}

std::string normalize_output(std::string_view bytes) {
  std::vector<std::string_view> lines;
  std::size_t pos = 0;
  for (;;) {
    const std::size_t nl = bytes.find('\n', pos);
    std::string_view line =
        bytes.substr(pos, nl == std::string_view::npos ? std::string_view::npos
                                                       : nl - pos);
    std::size_t end = line.size();
    while (end > 0 && is_space(line[end - 1])) --end;
    lines.push_back(line.substr(0, end));
    if (nl == std::string_view::npos) break;
    pos = nl + 1;
  }
  while (!lines.empty() && lines.back().empty()) lines.pop_back();
  std::string out;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (i) out.push_back('\n');
    out.append(lines[i]);
  }
  return out;
}

std::string encode_outcomes(const std::vector<TestOutcome>& outcomes,
                            ErrorEquivalence eq) {
  // kind tag, then a length-prefixed payload or exit code, per outcome.
  std::string enc;
  auto put_u64 = [&enc](std::uint64_t v) {
    for (int i = 7; i >= 0; --i) enc.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
  };
  put_u64(outcomes.size());
  for (const auto& o : outcomes) {
    enc.push_back(static_cast<char>('0' + static_cast<int>(o.kind)));
    if (o.kind == OutcomeKind::Output) {
      const std::string& p = o.payload ? *o.payload : std::string();
      put_u64(p.size());
      enc += p;
    } else if (o.kind == OutcomeKind::RuntimeError &&
               eq == ErrorEquivalence::ExitCode) {
      enc.push_back(o.exit_code ? 1 : 0);
      put_u64(static_cast<std::uint64_t>(static_cast<std::int64_t>(o.exit_code.value_or(0))));
    }
  }
  return enc;
}

BehaviorFingerprint make_fingerprint(std::string sample_id,
                                     std::vector<TestOutcome> outcomes,
                                     ErrorEquivalence eq) {
  BehaviorFingerprint fp;
  fp.sample_id = std::move(sample_id);
  fp.digest = sha256_hex(encode_outcomes(outcomes, eq));
  fp.outcomes = std::move(outcomes);
  return fp;
}

bool outcome_matches(const TestOutcome& got, const std::string& expected) {
  return got.kind == OutcomeKind::Output && got.payload &&
         *got.payload == normalize_output(expected);
}

PassResult score_outcomes(const std::vector<TestOutcome>& outcomes,
                          const std::vector<TestCase>& tests,
                          std::size_t failure_cap) {
  PassResult r;
  for (std::size_t i = 0; i < tests.size(); ++i) {
    const std::string expected = tests[i].expected_output.value_or("");
    if (outcome_matches(outcomes[i], expected)) {
      ++r.passed;
    } else {
      ++r.failed;
      if (r.failures.size() < failure_cap) {
        r.failures.push_back(
            FailedTest{tests[i].test_id, outcomes[i], expected, tests[i].input});
      }
    }
  }
  return r;
}

double mean_correctness(const std::vector<double>& scores) {
  if (scores.empty()) fail_domain("mean_correctness: empty score list");
  double sum = 0.0;
  for (double s : scores) {
    if (!(s >= 0.0 && s <= 1.0)) {
      fail_domain("mean_correctness: score outside [0,1]");
    }
    sum += s;
  }
  return sum / static_cast<double>(scores.size());
}

// ---- harness --------------------------------------------------------------

Harness::Harness(HarnessOptions opts) : opts_(std::move(opts)) {
  if (opts_.jobs == 0) opts_.jobs = 1;
  if (opts_.sandbox_path.empty()) {
    if (const char* v = std::getenv("ESEKIT_SANDBOX_PATH")) opts_.sandbox_path = v;
  }
  if (opts_.temp_root.empty()) {
    const char* t = std::getenv("TMPDIR");
    opts_.temp_root = (t && *t) ? t : "/tmp";
  }
  slots_ = std::make_unique<std::counting_semaphore<>>(
      static_cast<std::ptrdiff_t>(opts_.jobs));
}

std::string Harness::resolve(const std::string& command) const {
  if (command.find('/') != std::string::npos) {
    if (::access(command.c_str(), X_OK) == 0) return command;
    fail_environment("sandbox: command '" + command + "' is not executable");
  }
  std::string search = opts_.sandbox_path;
  if (const char* path = std::getenv("PATH")) {
    if (!search.empty()) search.push_back(':');
    search += path;
  }
  std::size_t pos = 0;
  while (pos <= search.size()) {
    std::size_t end = search.find(':', pos);
    if (end == std::string::npos) end = search.size();
    const std::string dir = search.substr(pos, end - pos);
    pos = end + 1;
    if (dir.empty()) continue;
    const std::string cand = dir + "/" + command;
    if (::access(cand.c_str(), X_OK) == 0) return cand;
  }
  fail_environment("sandbox: command '" + command +
                   "' not found (set ESEKIT_SANDBOX_PATH)");
}

RawRun Harness::run_process(const std::vector<std::string>& argv_in,
                            std::string_view stdin_bytes,
                            const LanguageProfile& profile,
                            const std::string& workdir) {
  if (argv_in.empty()) fail_environment("sandbox: empty command");
  std::vector<std::string> argv_s = argv_in;
  argv_s[0] = resolve(argv_s[0]);

  // Everything the child touches is prepared before fork.
  std::vector<char*> argv;
  for (auto& a : argv_s) argv.push_back(a.data());
  argv.push_back(nullptr);
  std::vector<std::string> env_s = {
      "PATH=/usr/local/bin:/usr/bin:/bin", "HOME=" + workdir, "LANG=C.UTF-8",
      "PYTHONDONTWRITEBYTECODE=1", "PYTHONHASHSEED=0"};
  std::vector<char*> envp;
  for (auto& e : env_s) envp.push_back(e.data());
  envp.push_back(nullptr);

  const bool drop = sandbox_drops_privileges(profile);
  const rlim_t mem = static_cast<rlim_t>(profile.memory_limit_bytes);
  const rlim_t cpu = static_cast<rlim_t>(profile.wall_timeout_ms / 1000 + 2);
  const rlim_t nproc = static_cast<rlim_t>(profile.max_processes);
  const rlim_t fsize = static_cast<rlim_t>(std::max<std::int64_t>(
      profile.max_output_bytes * 4, std::int64_t{16} << 20));
  const bool isolate_net = profile.isolate_network;
  const char* wd = workdir.c_str();

  Pipe in, out, err, status;
  slots_->acquire();
  struct SlotGuard {
    std::counting_semaphore<>* s;
    ~SlotGuard() { s->release(); }
  } guard{slots_.get()};

  const pid_t pid = ::fork();
  if (pid < 0) {
    fail_environment(std::string("sandbox: fork failed: ") + std::strerror(errno));
  }
  if (pid == 0) {
    ::setpgid(0, 0);
    if (isolate_net) ::unshare(CLONE_NEWNET);
    ::dup2(in.fd[0], 0);
    ::dup2(out.fd[1], 1);
    ::dup2(err.fd[1], 2);
    struct rlimit rl;
    rl.rlim_cur = rl.rlim_max = mem;
    ::setrlimit(RLIMIT_AS, &rl);
    rl.rlim_cur = rl.rlim_max = cpu;
    ::setrlimit(RLIMIT_CPU, &rl);
    rl.rlim_cur = rl.rlim_max = 0;
    ::setrlimit(RLIMIT_CORE, &rl);
    rl.rlim_cur = rl.rlim_max = fsize;
    ::setrlimit(RLIMIT_FSIZE, &rl);
    if (drop) {
      // NPROC is per user, so it is only meaningful for the sandbox user.
      rl.rlim_cur = rl.rlim_max = nproc;
      ::setrlimit(RLIMIT_NPROC, &rl);
      if (::setgroups(0, nullptr) != 0 || ::setgid(kSandboxGid) != 0 ||
          ::setuid(kSandboxUid) != 0) {
        int e = errno;
        (void)!::write(status.fd[1], &e, sizeof e);
        ::_exit(127);
      }
    }
    if (::chdir(wd) != 0) {
      int e = errno;
      (void)!::write(status.fd[1], &e, sizeof e);
      ::_exit(127);
    }
    ::execve(argv[0], argv.data(), envp.data());
    int e = errno;
    (void)!::write(status.fd[1], &e, sizeof e);
    ::_exit(127);
  }

  in.close_read();
  out.close_write();
  err.close_write();
  status.close_write();

  // Exec succeeded iff the CLOEXEC status pipe closes without data.
  {
    int child_errno = 0;
    ssize_t n;
    do {
      n = ::read(status.fd[0], &child_errno, sizeof child_errno);
    } while (n < 0 && errno == EINTR);
    if (n == static_cast<ssize_t>(sizeof child_errno)) {
      ::kill(pid, SIGKILL);
      int st;
      ::waitpid(pid, &st, 0);
      fail_environment("sandbox: cannot start '" + argv_s[0] +
                       "': " + std::strerror(child_errno));
    }
  }

  const int pidfd = static_cast<int>(::syscall(SYS_pidfd_open, pid, 0));
  set_nonblocking(out.fd[0]);
  set_nonblocking(err.fd[0]);
  if (!stdin_bytes.empty()) {
    set_nonblocking(in.fd[1]);
  } else {
    in.close_write();
  }

  RawRun run;
  std::size_t written = 0;
  bool reaped = false;
  bool timed_out = false;
  bool truncated = false;
  int wstatus = 0;
  const std::size_t max_out = static_cast<std::size_t>(profile.max_output_bytes);
  const std::int64_t deadline = now_ms() + profile.wall_timeout_ms;
  char buf[65536];

  auto reap = [&](int flags) {
    if (reaped) return;
    // Kill stragglers while the zombie leader still pins the group id.
    siginfo_t info{};
    if (::waitid(P_PID, static_cast<id_t>(pid), &info,
                 WEXITED | WNOWAIT | flags) == 0 &&
        info.si_pid == pid) {
      ::killpg(pid, SIGKILL);
      if (::waitpid(pid, &wstatus, 0) == pid) reaped = true;
    }
  };

  while (true) {
    if (!reaped) reap(WNOHANG);
    if (reaped && out.fd[0] < 0 && err.fd[0] < 0) break;
    const std::int64_t remaining = deadline - now_ms();
    if (remaining <= 0) {
      if (!reaped) timed_out = true;
      break;
    }
    pollfd fds[4];
    int nfds = 0;
    int idx_in = -1, idx_out = -1, idx_err = -1, idx_pid = -1;
    if (in.fd[1] >= 0) {
      idx_in = nfds;
      fds[nfds++] = {in.fd[1], POLLOUT, 0};
    }
    if (out.fd[0] >= 0) {
      idx_out = nfds;
      fds[nfds++] = {out.fd[0], POLLIN, 0};
    }
    if (err.fd[0] >= 0) {
      idx_err = nfds;
      fds[nfds++] = {err.fd[0], POLLIN, 0};
    }
    if (!reaped && pidfd >= 0) {
      idx_pid = nfds;
      fds[nfds++] = {pidfd, POLLIN, 0};
    }
    const int wait_ms = (pidfd >= 0 || reaped)
                            ? static_cast<int>(std::min<std::int64_t>(remaining, 1000))
                            : static_cast<int>(std::min<std::int64_t>(remaining, 5));
    const int rc = ::poll(fds, static_cast<nfds_t>(nfds), wait_ms);
    if (rc < 0) {
      if (errno == EINTR) continue;
      break;
    }
    if (idx_in >= 0 && fds[idx_in].revents) {
      if (fds[idx_in].revents & (POLLERR | POLLHUP)) {
        in.close_write();
      } else {
        const ssize_t n = ::write(in.fd[1], stdin_bytes.data() + written,
                                  stdin_bytes.size() - written);
        if (n > 0) written += static_cast<std::size_t>(n);
        if (n < 0 && errno != EAGAIN && errno != EINTR) in.close_write();
        if (written >= stdin_bytes.size()) in.close_write();
      }
    }
    if (idx_out >= 0 && fds[idx_out].revents) {
      const ssize_t n = ::read(out.fd[0], buf, sizeof buf);
      if (n > 0) {
        run.stdout_bytes.append(buf, static_cast<std::size_t>(n));
        if (run.stdout_bytes.size() > max_out) {
          truncated = true;
          break;
        }
      } else if (n == 0 || (errno != EAGAIN && errno != EINTR)) {
        out.close_read();
      }
    }
    if (idx_err >= 0 && fds[idx_err].revents) {
      const ssize_t n = ::read(err.fd[0], buf, sizeof buf);
      if (n > 0) {
        const std::size_t room = kStderrCap - std::min(kStderrCap, run.stderr_bytes.size());
        run.stderr_bytes.append(buf, std::min(room, static_cast<std::size_t>(n)));
      } else if (n == 0 || (errno != EAGAIN && errno != EINTR)) {
        err.close_read();
      }
    }
    if (idx_pid >= 0 && fds[idx_pid].revents) reap(0);
  }

  if (!reaped) {
    ::killpg(pid, SIGKILL);
    ::kill(pid, SIGKILL);
    if (::waitpid(pid, &wstatus, 0) == pid) reaped = true;
  }
  if (pidfd >= 0) ::close(pidfd);
  // Orphans linger as zombies until init reaps them and still count against
  // the sandbox user's process limit; the next run must not inherit them.
  for (int i = 0; i < 400 && ::kill(-pid, 0) == 0; ++i) {
    ::killpg(pid, SIGKILL);
    ::usleep(5000);
  }

  if (truncated) {
    run.kind = OutcomeKind::OutputTruncated;
    run.stdout_bytes.resize(max_out);
  } else if (timed_out) {
    run.kind = OutcomeKind::Timeout;
  } else if (WIFEXITED(wstatus)) {
    run.exit_code = WEXITSTATUS(wstatus);
    run.kind = *run.exit_code == 0 ? OutcomeKind::Output : OutcomeKind::RuntimeError;
  } else if (WIFSIGNALED(wstatus)) {
    run.exit_code = 128 + WTERMSIG(wstatus);
    run.kind = OutcomeKind::RuntimeError;
  } else {
    run.kind = OutcomeKind::RuntimeError;
  }
  return run;
}

TestOutcome Harness::run_one(const std::string& program_path,
                             const std::string& source_digest,
                             const TestCase& test,
                             const LanguageProfile& profile,
                             const std::string& scratch_root) {
  std::string key;
  if (opts_.memoize) {
    key = profile.profile_id + '\0' + source_digest + '\0' + sha256_hex(test.input);
    std::lock_guard lock(memo_mu_);
    if (auto it = memo_.find(key); it != memo_.end()) return it->second;
  }
  ScratchDir work(scratch_root, "run-", sandbox_drops_privileges(profile));
  const RawRun raw = run_process(substitute(profile.run_command, program_path),
                                 test.input, profile, work.path());
  TestOutcome o;
  switch (raw.kind) {
    case OutcomeKind::Output:
      o = TestOutcome::output(normalize_output(raw.stdout_bytes));
      break;
    case OutcomeKind::Timeout: o = TestOutcome::timeout(); break;
    case OutcomeKind::OutputTruncated: o = TestOutcome::truncated(); break;
    case OutcomeKind::RuntimeError: o = TestOutcome::runtime_error(raw.exit_code); break;
  }
  if (opts_.memoize) {
    std::lock_guard lock(memo_mu_);
    memo_.emplace(key, o);
  }
  return o;
}

namespace {
// Program file inside a scratch directory readable by the sandbox user.
struct StagedProgram {
  ScratchDir dir;
  std::string path;
  StagedProgram(const std::string& root, const CandidateProgram& program,
                const LanguageProfile& profile)
      : dir(root, "esekit-", sandbox_drops_privileges(profile)),
        path(dir.path() + "/" + profile.program_filename) {
    write_file(path, program.source);
    ::chmod(path.c_str(), 0644);
  }
};
}  // namespace

SyntaxVerdict Harness::check_syntax(const CandidateProgram& program,
                                    const LanguageProfile& profile) {
  if (profile.syntax_check_command.empty()) {
    fail_usage("profile '" + profile.profile_id + "' has no syntax_check_command");
  }
  StagedProgram staged(opts_.temp_root, program, profile);
  const RawRun raw =
      run_process(substitute(profile.syntax_check_command, staged.path), "",
                  profile, staged.dir.path());
  SyntaxVerdict v;
  v.valid = raw.kind == OutcomeKind::Output;
  if (!v.valid) {
    v.diagnostic = raw.kind == OutcomeKind::Timeout
                       ? "syntax check timed out"
                       : normalize_output(raw.stderr_bytes + raw.stdout_bytes);
  }
  return v;
}

SyntaxVerdict Harness::check_syntax_in_place(CandidateProgram& program,
                                             const LanguageProfile& profile) {
  SyntaxVerdict v = check_syntax(program, profile);
  program.syntactically_valid = v.valid ? Validity::Valid : Validity::Invalid;
  return v;
}

std::vector<TestOutcome> Harness::run_tests(const CandidateProgram& program,
                                            const std::vector<TestCase>& tests,
                                            const LanguageProfile& profile) {
  std::vector<TestOutcome> outcomes(tests.size());
  if (tests.empty()) return outcomes;
  StagedProgram staged(opts_.temp_root, program, profile);
  const std::string digest = opts_.memoize ? sha256_hex(program.source) : "";
  parallel_for(tests.size(), opts_.jobs, [&](std::size_t i) {
    outcomes[i] = run_one(staged.path, digest, tests[i], profile, staged.dir.path());
  });
  return outcomes;
}

BehaviorFingerprint Harness::execute_on_tests(const CandidateProgram& program,
                                              const std::vector<TestCase>& tests,
                                              const LanguageProfile& profile) {
  if (tests.empty()) fail_domain("execute_on_tests: empty test list");
  return make_fingerprint(program.sample_id, run_tests(program, tests, profile),
                          profile.error_equivalence);
}

PassResult Harness::evaluate_public(const CandidateProgram& program,
                                    const std::vector<TestCase>& public_tests,
                                    const LanguageProfile& profile) {
  for (const auto& t : public_tests) validate(t, true);
  return score_outcomes(run_tests(program, public_tests, profile), public_tests,
                        opts_.failure_cap);
}

double Harness::correctness_score(const CandidateProgram& program,
                                  const std::vector<TestCase>& hidden_tests,
                                  const LanguageProfile& profile) {
  if (hidden_tests.empty()) fail_domain("correctness_score: empty hidden test suite");
  for (const auto& t : hidden_tests) validate(t, true);
  if (program.syntactically_valid == Validity::Invalid) return 0.0;
  const PassResult r = score_outcomes(run_tests(program, hidden_tests, profile),
                                      hidden_tests, 0);
  return static_cast<double>(r.passed) / static_cast<double>(hidden_tests.size());
}

}  // namespace esekit

#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <semaphore>
#include <string>
#include <string_view>
#include <vector>

#include "esekit/domain.hpp"

namespace esekit {

// How RuntimeError outcomes compare for clustering.
enum class ErrorEquivalence {
  Coarse,    // every RuntimeError equals every other RuntimeError
  ExitCode,  // RuntimeErrors compare equal only with matching exit codes
};

inline constexpr std::string_view kProgramPlaceholder = "{program}";

struct LanguageProfile {
  std::string profile_id;
  std::vector<std::string> syntax_check_command;  // may be empty
  std::vector<std::string> run_command;  // exactly one {program} placeholder
  std::string program_filename = "main";
  std::int64_t wall_timeout_ms = 2000;
  std::int64_t memory_limit_bytes = std::int64_t{1} << 30;
  std::int64_t max_output_bytes = std::int64_t{1} << 20;
  std::int64_t max_processes = 64;
  ErrorEquivalence error_equivalence = ErrorEquivalence::Coarse;
  // Run candidates as an unprivileged user when the harness runs as root.
  bool drop_privileges = true;
  // Best effort: a fresh network namespace without interfaces.
  bool isolate_network = false;
};

void validate(const LanguageProfile& p);
void to_json(Json& j, const LanguageProfile& p);
void from_json(const Json& j, LanguageProfile& p);

// Built-in profiles ("python3", "sh"); a profiles file may override them.
std::map<std::string, LanguageProfile> builtin_profiles();
// {"schema_version":1,"profiles":[...]} merged over the built-ins.
std::map<std::string, LanguageProfile> load_profiles(const std::string& path);

enum class OutcomeKind { Output, Timeout, RuntimeError, OutputTruncated };

std::string_view to_string(OutcomeKind k);

struct TestOutcome {
  OutcomeKind kind = OutcomeKind::Output;
  std::optional<std::string> payload;  // normalized; Output only
  std::optional<int> exit_code;

  static TestOutcome output(std::string normalized_payload);
  static TestOutcome timeout();
  static TestOutcome runtime_error(std::optional<int> exit_code);
  static TestOutcome truncated();

  bool operator==(const TestOutcome&) const = default;
};

void to_json(Json& j, const TestOutcome& o);
void from_json(const Json& j, TestOutcome& o);

// Strips trailing whitespace from each line and drops trailing blank lines.
// Byte-oriented; idempotent.
std::string normalize_output(std::string_view bytes);

struct BehaviorFingerprint {
  std::string sample_id;
  std::vector<TestOutcome> outcomes;  // aligned with the test list
  std::string digest;                 // sha256 of the canonical encoding
};

// Canonical byte encoding of an outcome vector under an equivalence mode.
std::string encode_outcomes(const std::vector<TestOutcome>& outcomes,
                            ErrorEquivalence eq);
BehaviorFingerprint make_fingerprint(std::string sample_id,
                                     std::vector<TestOutcome> outcomes,
                                     ErrorEquivalence eq);

struct FailedTest {
  std::string test_id;
  TestOutcome got;
  std::string expected;
  std::string input;
};

struct PassResult {
  std::size_t passed = 0;
  std::size_t failed = 0;
  std::vector<FailedTest> failures;  // capped, counts stay exact
  bool all_passed() const { return failed == 0; }
};

struct SyntaxVerdict {
  bool valid = false;
  std::string diagnostic;
};

struct HarnessOptions {
  unsigned jobs = 1;  // max concurrently running sandboxes
  std::size_t failure_cap = 8;
  // Memoize outcomes by (profile, source, input). Only sound for
  // deterministic programs; used by reproducible sweeps.
  bool memoize = false;
  // Directory prepended when resolving relative command names; defaults to
  // $ESEKIT_SANDBOX_PATH, then $PATH.
  std::string sandbox_path;
  std::string temp_root;  // defaults to $TMPDIR or /tmp
};

// Result of one sandboxed process run.
struct RawRun {
  OutcomeKind kind = OutcomeKind::Output;
  std::string stdout_bytes;
  std::string stderr_bytes;  // capped
  std::optional<int> exit_code;
};

class Harness {
 public:
  explicit Harness(HarnessOptions opts = {});
  Harness(const Harness&) = delete;
  Harness& operator=(const Harness&) = delete;

  const HarnessOptions& options() const { return opts_; }

  SyntaxVerdict check_syntax(const CandidateProgram& program,
                             const LanguageProfile& profile);
  // Sets program.syntactically_valid from the verdict.
  SyntaxVerdict check_syntax_in_place(CandidateProgram& program,
                                      const LanguageProfile& profile);

  std::vector<TestOutcome> run_tests(const CandidateProgram& program,
                                     const std::vector<TestCase>& tests,
                                     const LanguageProfile& profile);

  BehaviorFingerprint execute_on_tests(const CandidateProgram& program,
                                       const std::vector<TestCase>& tests,
                                       const LanguageProfile& profile);

  PassResult evaluate_public(const CandidateProgram& program,
                             const std::vector<TestCase>& public_tests,
                             const LanguageProfile& profile);

  // passed / total over hidden tests; 0.0 for syntactically invalid programs.
  double correctness_score(const CandidateProgram& program,
                           const std::vector<TestCase>& hidden_tests,
                           const LanguageProfile& profile);

  // Runs argv in the sandbox with `stdin_bytes`; exposed for tests.
  RawRun run_process(const std::vector<std::string>& argv,
                     std::string_view stdin_bytes,
                     const LanguageProfile& profile,
                     const std::string& workdir);

 private:
  std::string resolve(const std::string& command) const;
  TestOutcome run_one(const std::string& program_path,
                      const std::string& source_digest,
                      const TestCase& test, const LanguageProfile& profile,
                      const std::string& scratch_root);

  HarnessOptions opts_;
  std::unique_ptr<std::counting_semaphore<>> slots_;
  std::mutex memo_mu_;
  std::map<std::string, TestOutcome> memo_;
};

// Pass/fail comparison used by evaluate_public and correctness_score.
bool outcome_matches(const TestOutcome& got, const std::string& expected);

PassResult score_outcomes(const std::vector<TestOutcome>& outcomes,
                          const std::vector<TestCase>& tests,
                          std::size_t failure_cap);

// Arithmetic mean of per-sample correctness scores.
double mean_correctness(const std::vector<double>& scores);

}  // namespace esekit

#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

namespace esekit {

using Json = nlohmann::json;

// Bumped whenever a JSONL record layout changes incompatibly.
inline constexpr int kSchemaVersion = 1;

struct TestCase {
  std::string test_id;
  std::string input;  // fed on stdin
  std::optional<std::string> expected_output;

  bool operator==(const TestCase&) const = default;
};

struct ProblemBundle {
  std::string problem_id;
  std::string prompt;
  std::vector<TestCase> public_tests;
  std::vector<TestCase> generated_tests;
  std::vector<TestCase> hidden_tests;
  std::string language_profile_id;
  // Free-form provenance, e.g. which model produced generated_tests.
  Json metadata = Json::object();

  bool operator==(const ProblemBundle&) const = default;
};

enum class Validity { Unknown, Valid, Invalid };

struct CandidateProgram {
  std::string sample_id;
  std::string model_id;
  std::string source;
  std::optional<double> sequence_log_likelihood;  // nats, summed over tokens
  std::optional<std::int64_t> token_count;
  Validity syntactically_valid = Validity::Unknown;
  // Number of debug refinements applied to reach this program.
  int refinement_step = 0;

  bool operator==(const CandidateProgram&) const = default;
};

struct SampleSet {
  std::string problem_id;
  std::vector<CandidateProgram> samples;
  std::map<std::string, std::vector<std::string>> grouping;  // model -> ids

  std::map<std::string, std::string> model_of() const;
  const CandidateProgram* find(std::string_view sample_id) const;
  std::vector<const CandidateProgram*> of_model(std::string_view model) const;

  bool operator==(const SampleSet&) const = default;
};

// Builds a SampleSet (with grouping) from a flat list in sample order.
SampleSet make_sample_set(std::string problem_id,
                          std::vector<CandidateProgram> samples);

struct RunManifest {
  std::string config_digest;
  std::uint64_t rng_seed = 0;
  std::string started_at;
  std::string finished_at;
  std::string tool_version;
};

// Digest of a canonical configuration plus input file digests.
RunManifest make_manifest(const Json& config, std::uint64_t seed);

// ---- validation -----------------------------------------------------------

struct BundleLoadOptions {
  // Reject bundles with empty generated_tests (clustering requested).
  bool strict = false;
};

void validate(const TestCase& t, bool expected_required);
void validate(const ProblemBundle& b, const BundleLoadOptions& opts = {});
void validate(const CandidateProgram& c);
// `plan`, when given, maps model_id -> declared number of samples.
void validate(const SampleSet& s,
              const std::map<std::string, std::size_t>* plan = nullptr);

// ---- JSONL ----------------------------------------------------------------

std::vector<ProblemBundle> parse_bundles(std::string_view jsonl,
                                         const BundleLoadOptions& opts = {});
std::vector<ProblemBundle> load_bundles(const std::string& path,
                                        const BundleLoadOptions& opts = {});

struct SampleLoadOptions {
  // When set, samples must reference a problem in this corpus.
  const std::vector<ProblemBundle>* corpus = nullptr;
  const std::map<std::string, std::size_t>* plan = nullptr;
};

std::vector<SampleSet> parse_samples(std::string_view jsonl,
                                     const SampleLoadOptions& opts = {});
std::vector<SampleSet> load_samples(const std::string& path,
                                    const SampleLoadOptions& opts = {});

std::string dump_bundles(const std::vector<ProblemBundle>& bundles);
std::string dump_samples(const std::vector<SampleSet>& sets);

// ---- canonical JSON -------------------------------------------------------

// Sorted keys, no whitespace, floats as 12 significant digits. Throws a
// Domain error on NaN or infinity.
std::string canonical_json(const Json& j);

// Canonical JSON plus a trailing newline, written atomically.
void write_report(const Json& report, const std::string& path);

template <class T>
  requires(!std::is_same_v<std::decay_t<T>, Json>)
void write_report(const T& report, const std::string& path) {
  write_report(Json(report), path);
}

void to_json(Json& j, const TestCase& t);
void from_json(const Json& j, TestCase& t);
void to_json(Json& j, const ProblemBundle& b);
void from_json(const Json& j, ProblemBundle& b);
void to_json(Json& j, const CandidateProgram& c);
void from_json(const Json& j, CandidateProgram& c);
void to_json(Json& j, const RunManifest& m);

std::string_view to_string(Validity v);

}  // namespace esekit

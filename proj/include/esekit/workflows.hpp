#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "esekit/cascade.hpp"
#include "esekit/decision.hpp"
#include "esekit/domain.hpp"
#include "esekit/entropy.hpp"
#include "esekit/exec.hpp"

namespace esekit {

// JSONL helpers shared by the commands.
std::vector<Json> parse_jsonl(std::string_view text, const std::string& what);
std::vector<Json> read_jsonl(const std::string& path);
std::string to_jsonl(const std::vector<Json>& records);

// ---- score ----------------------------------------------------------------

struct ScoreOptions {
  EntropyMode mode = EntropyMode::Blackbox;
  SelectionRule rule = SelectionRule::Longest;
  std::uint64_t seed = 0;
  unsigned jobs = 1;
  // Put syntactically invalid samples into one sentinel cluster instead of
  // leaving them out of clustering and entropy.
  bool invalid_as_cluster = false;
};

inline constexpr std::string_view kInvalidClusterId = "invalid";

struct ScoreRun {
  std::vector<Json> records;  // problems that scored, corpus order
  std::vector<std::pair<std::string, std::string>> failures;  // problem_id, error
  Json summary;
};

// Throws a Domain error up front when graybox mode lacks likelihoods.
void require_likelihoods(const std::vector<SampleSet>& sets);

Json score_problem(const ProblemBundle& bundle, const SampleSet& samples,
                   const LanguageProfile& profile, Harness& harness, const ScoreOptions& opts);

ScoreRun score_corpus(const std::vector<ProblemBundle>& bundles,
                      const std::vector<SampleSet>& sets,
                      const std::map<std::string, LanguageProfile>& profiles, Harness& harness,
                      const ScoreOptions& opts);

// ---- calibrate / select ---------------------------------------------------

// Per scored method: TPR, FPR, operating threshold and accuracy at each
// FPR constraint.
Json calibrate(const std::vector<Json>& records, const std::vector<double>& constraints);

struct Selection {
  bool accepted = false;
  double u = 0.0;
  std::string sample_id;
  std::string source;
  std::string reason;  // set on abstention
};

// method: edse, ese, normalized_u, pe, dse:<model> or se:<model>.
Selection select_from_record(const Json& record, const std::string& method, double tau,
                             SelectionRule rule, std::uint64_t seed);

// ---- cluster analysis -----------------------------------------------------

struct ClusterAnalysisOptions {
  std::size_t k = 5;
  std::size_t min_incorrect = 3;
  unsigned jobs = 1;
};

// Largest-cluster histograms on hidden tests, per model and for an even
// ensemble split (the first n/L samples of each model).
Json analyze_clusters(const std::vector<ProblemBundle>& bundles,
                      const std::vector<SampleSet>& sets,
                      const std::map<std::string, LanguageProfile>& profiles, Harness& harness,
                      const ClusterAnalysisOptions& opts);

// ---- cascade --------------------------------------------------------------

struct CascadeRunOptions {
  std::string results_path;  // per-problem JSONL; empty = keep in memory
  bool resume = false;
  unsigned jobs = 1;
};

struct CascadeRun {
  std::vector<Json> records;  // every record in the log, corpus order
  CascadeSummary summary;
  std::size_t skipped = 0;    // resumed problems
};

CascadeRun run_cascade_corpus(const std::vector<ProblemBundle>& bundles,
                              const CascadeConfig& config,
                              const std::map<std::string, LanguageProfile>& profiles,
                              Harness& harness, const CascadeRunOptions& opts);

// ---- manifest -------------------------------------------------------------

// Digest over the canonical config plus the bytes of each input file.
RunManifest build_manifest(const std::string& command, const Json& config,
                           const std::vector<std::string>& inputs, std::uint64_t seed);
void write_manifest(RunManifest m, const std::string& path);

}  // namespace esekit

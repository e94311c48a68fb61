#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "esekit/clustering.hpp"
#include "esekit/decision.hpp"
#include "esekit/domain.hpp"
#include "esekit/entropy.hpp"
#include "esekit/exec.hpp"
#include "esekit/gateway.hpp"

namespace esekit {

struct EnsembleMember {
  std::string model_id;
  std::size_t samples = 0;
};

struct LayerConfig {
  std::size_t layer_index = 1;  // 1-based
  std::vector<EnsembleMember> ensemble;
  std::size_t debug_steps = 0;
  double alpha = 0.5;
  double tau = 0.0;

  std::size_t total_samples() const;
};

enum class UncertaintySource { Edse, Ese };

struct TestGenerationConfig {
  std::string model_id;
  std::size_t count = 10;
  std::size_t min_ok = 1;
};

struct CascadeConfig {
  std::vector<LayerConfig> layers;
  SelectionRule selection_rule = SelectionRule::Longest;
  UncertaintySource uncertainty = UncertaintySource::Edse;
  std::map<std::string, double> flops_per_token;
  std::map<std::string, ModelSource> models;
  std::uint64_t seed = 0;
  std::size_t refine_failure_cap = 3;
  // Used only for problems whose bundle has no generated tests.
  std::optional<TestGenerationConfig> test_generation;
  Json raw = Json::object();  // as loaded; feeds the manifest digest
};

void validate(const CascadeConfig& c);
CascadeConfig parse_cascade_config(const Json& j, const std::string& base_dir);
CascadeConfig load_cascade_config(const std::string& path);

// ---- cost -----------------------------------------------------------------

// completion_tokens x flops_per_token; unknown model is a Domain error.
double record_cost(const GenerationUsage& usage,
                   const std::map<std::string, double>& flops_per_token);

struct TokenTotals {
  std::int64_t prompt_tokens = 0;
  std::int64_t completion_tokens = 0;
  std::int64_t calls = 0;
};

// Token counts are kept as integers per (layer, model); flops are derived
// from them, so totals never drift with the order of calls.
class CostLedger {
 public:
  // layer 0 is test generation; cascade layers are 1-based.
  void add(std::size_t layer, const GenerationUsage& usage);

  const std::map<std::string, TokenTotals>& per_model() const { return per_model_; }
  std::map<std::string, TokenTotals> layer_tokens(std::size_t layer) const;
  std::int64_t generation_calls() const;  // cascade layers only
  std::size_t highest_layer() const;

  double layer_flops(std::size_t layer, const std::map<std::string, double>& fpt) const;
  double total_flops(const std::map<std::string, double>& fpt) const;

  Json to_json(const std::map<std::string, double>& fpt) const;

 private:
  std::map<std::string, TokenTotals> per_model_;
  std::map<std::size_t, std::map<std::string, TokenTotals>> per_layer_;
};

// ---- layers ---------------------------------------------------------------

// S = alpha * lambda - (1 - alpha) * u_hat.
double cascade_score(double lambda, double u_hat, double alpha);

struct CandidateTrace {
  std::string origin_id;  // sample id as first drawn
  std::string final_id;
  std::string model_id;
  std::size_t refinements = 0;
  bool passed_public = false;
  std::string cause;  // why a candidate failed, when not a plain test failure
};

struct DebugResult {
  std::vector<CandidateProgram> passing;
  std::vector<CandidateTrace> traces;  // one per candidate, input order
  double lambda = 0.0;
  std::vector<GenerationUsage> usage;  // refine calls, in candidate order
};

struct DebugContext {
  const ProblemBundle* problem = nullptr;
  const LanguageProfile* profile = nullptr;
  Harness* harness = nullptr;
  std::map<std::string, ModelClient*> source_of;  // model_id -> client
  std::size_t failure_cap = 3;
  unsigned jobs = 1;
};

// Each candidate is refined at most D times, stopping on the first public
// pass. Candidates run concurrently; a chain is serial.
DebugResult debug_and_filter(std::vector<CandidateProgram> candidates, std::size_t D,
                             const DebugContext& ctx);

enum class LayerDecision { Accept, Escalate };

struct LayerOutcome {
  std::size_t layer_index = 1;
  std::size_t candidates = 0;
  std::size_t passing = 0;
  double lambda = 0.0;
  SemanticPartition partition;
  std::optional<UncertaintyReport> report;  // absent when entropy was skipped
  std::string uncertainty_used;             // "edse", "ese" or ""
  double normalized_u = 1.0;
  double score = 0.0;
  LayerDecision decision = LayerDecision::Escalate;
  std::optional<CandidateProgram> selected;
  bool no_solution = false;
  std::vector<CandidateTrace> traces;
};

struct CascadeResult {
  std::string problem_id;
  std::size_t exit_layer = 0;
  bool no_solution = false;
  std::optional<CandidateProgram> selected;
  std::optional<double> hidden_score;
  std::vector<LayerOutcome> layers;
  CostLedger ledger;
};

class CascadeRunner {
 public:
  CascadeRunner(CascadeConfig config, Harness& harness,
                std::map<std::string, LanguageProfile> profiles, unsigned jobs = 1);

  const CascadeConfig& config() const { return config_; }
  CascadeConfig& mutable_config() { return config_; }

  CascadeResult run(const ProblemBundle& problem);

  LayerOutcome run_layer(const ProblemBundle& problem, const std::vector<TestCase>& gen_tests,
                         const LayerConfig& layer, bool is_final, std::uint64_t seed,
                         CostLedger& ledger);

  // Throws Usage when any configured source is not reproducible.
  void require_deterministic() const;

 private:
  const LanguageProfile& profile_for(const ProblemBundle& p) const;

  CascadeConfig config_;
  Harness& harness_;
  std::map<std::string, LanguageProfile> profiles_;
  unsigned jobs_;
  std::map<std::string, std::unique_ptr<ModelClient>> clients_;
};

// Per-problem log record; floats canonicalized on the way out.
Json result_record(const CascadeResult& r, const CascadeConfig& config);

struct CascadeSummary {
  std::size_t problems = 0;
  std::size_t passed = 0;
  double pass_rate = 0.0;
  double cost_tflops = 0.0;
  double exit_at_l1 = 0.0;
  std::optional<double> pass_at_exit;  // among layer-1 acceptances with a solution
  std::size_t no_solution = 0;
  std::map<std::size_t, std::size_t> exit_layers;
};

// Aggregates from log records, so a recount from the log file is exact.
CascadeSummary summarize(const std::vector<Json>& records);
void to_json(Json& j, const CascadeSummary& s);

struct SweepGrid {
  std::vector<double> tau1;
  std::vector<double> alpha1;
};

struct SweepRow {
  double tau1 = 0.0;
  double alpha1 = 0.0;
  CascadeSummary summary;
  std::vector<Json> records;
};

// Re-runs the cascade per grid point with the same seed. Requires
// deterministic sources; uses a memoizing harness.
std::vector<SweepRow> sweep_thresholds(const std::vector<ProblemBundle>& corpus,
                                       const CascadeConfig& config, const SweepGrid& grid,
                                       const std::map<std::string, LanguageProfile>& profiles,
                                       const HarnessOptions& harness_options);

std::string sweep_csv(const std::vector<SweepRow>& rows);

// "tau=0.2,0.3;alpha=0.5" -> grid; missing axes take the config's layer-1
// values.
SweepGrid parse_sweep_spec(const std::string& spec, const CascadeConfig& config);

std::string_view to_string(LayerDecision d);

}  // namespace esekit

#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "esekit/domain.hpp"
#include "esekit/exec.hpp"

namespace esekit {

struct LiveConfig {
  std::string base_url;  // e.g. https://host:8443 ; requests go to {base}/v1/chat/completions
  std::string remote_model;  // defaults to the model_id
  std::string api_key_env = "ESEKIT_API_TOKEN";
  std::int64_t request_timeout_ms = 120000;
  double temperature = 0.8;
  std::int64_t max_tokens = 4096;
  bool logprobs = false;
  unsigned max_in_flight = 8;
  int attempts = 3;
  std::int64_t backoff_ms = 500;
  bool whole_completion_fallback = false;
  std::string record_path;  // optional replay store to append to
};

struct ReplayConfig {
  std::string path;
};

struct MockConfig {
  Json script;  // behavior table
  std::uint64_t seed = 0;
};

struct ModelSource {
  std::string model_id;
  std::variant<LiveConfig, ReplayConfig, MockConfig> config;

  std::string_view kind() const;
};

// {"model_id", "kind": "live"|"replay"|"mock", ...}; relative paths resolve
// against base_dir.
ModelSource parse_model_source(const std::string& model_id, const Json& j,
                               const std::string& base_dir);

struct GenerationUsage {
  std::string model_id;
  std::int64_t prompt_tokens = 0;
  std::int64_t completion_tokens = 0;
  std::int64_t calls = 0;  // programs or test suites produced

  GenerationUsage& operator+=(const GenerationUsage& o);
};

struct GenerationRequest {
  std::string problem_id;
  std::string prompt;     // problem statement
  std::string id_prefix;  // sample ids become {id_prefix}-{j}
};

struct SampleBatch {
  std::vector<CandidateProgram> programs;
  GenerationUsage usage;
};

struct Refinement {
  CandidateProgram program;
  GenerationUsage usage;
};

struct GeneratedTests {
  std::vector<TestCase> tests;
  std::size_t dropped = 0;  // malformed items
  GenerationUsage usage;
};

// Uniform access to a program source. Implementations are safe to call
// concurrently.
class ModelClient {
 public:
  virtual ~ModelClient() = default;
  virtual const std::string& model_id() const = 0;
  // True when identical calls always return identical results.
  virtual bool deterministic() const = 0;

  virtual SampleBatch sample(const GenerationRequest& req, std::size_t n,
                             std::uint64_t seed) = 0;
  // One revised program from feedback; failure_cap bounds the failing cases
  // embedded in the prompt.
  virtual Refinement refine(const GenerationRequest& req, const CandidateProgram& program,
                            const PassResult& feedback, const std::string& diagnostics,
                            std::size_t failure_cap) = 0;
  virtual GeneratedTests generate_tests(const GenerationRequest& req, std::size_t n,
                                        std::size_t min_ok) = 0;
};

std::unique_ptr<ModelClient> make_client(const ModelSource& source);

// ---- prompt construction and completion parsing -----------------------------

struct ChatMessage {
  std::string role;
  std::string content;
};

std::vector<ChatMessage> sample_messages(const std::string& problem_prompt);
std::vector<ChatMessage> refine_messages(const std::string& problem_prompt,
                                         const CandidateProgram& program,
                                         const PassResult& feedback,
                                         const std::string& diagnostics,
                                         std::size_t failure_cap);
std::vector<ChatMessage> test_generation_messages(const std::string& problem_prompt,
                                                  std::size_t n);

// Digest keying replay records: sha256 over the canonical message list.
std::string prompt_digest(const std::vector<ChatMessage>& messages);

// First fenced code block, or nullopt.
std::optional<std::string> extract_code_block(const std::string& completion);

// Parses ```input fenced items; malformed items are counted, duplicates
// removed (first occurrence kept).
GeneratedTests parse_test_completion(const std::string& completion);

}  // namespace esekit

#define CPPHTTPLIB_OPENSSL_SUPPORT
#include "httplib.h"

#include "esekit/gateway.hpp"

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <semaphore>
#include <set>
#include <thread>

#include "esekit/error.hpp"
#include "esekit/util.hpp"

namespace esekit {

namespace fs = std::filesystem;

namespace {

std::int64_t approx_tokens(std::string_view text) {
  return static_cast<std::int64_t>((text.size() + 3) / 4);
}

std::string join_messages(const std::vector<ChatMessage>& msgs) {
  std::string out;
  for (const auto& m : msgs) out += m.content;
  return out;
}

Json messages_json(const std::vector<ChatMessage>& msgs) {
  Json arr = Json::array();
  for (const auto& m : msgs) arr.push_back({{"role", m.role}, {"content", m.content}});
  return arr;
}

std::string describe(const TestOutcome& o) {
  switch (o.kind) {
    case OutcomeKind::Output: return "output:\n```\n" + o.payload.value_or("") + "\n```";
    case OutcomeKind::Timeout: return "time limit exceeded";
    case OutcomeKind::OutputTruncated: return "output limit exceeded";
    case OutcomeKind::RuntimeError:
      return "runtime error" +
             (o.exit_code ? " (exit code " + std::to_string(*o.exit_code) + ")" : "");
  }
  return "";
}

std::string resolve_path(const std::string& p, const std::string& base_dir) {
  if (p.empty() || fs::path(p).is_absolute() || base_dir.empty()) return p;
  return (fs::path(base_dir) / p).string();
}

// "x-3.r1" refined again becomes "x-3.r2", never "x-3.r1.r2".
std::string refined_id(const std::string& id, int step) {
  const std::size_t pos = id.rfind(".r");
  return (pos == std::string::npos ? id : id.substr(0, pos)) + ".r" + std::to_string(step);
}

// ---- mock -----------------------------------------------------------------

class MockClient final : public ModelClient {
 public:
  MockClient(std::string model_id, MockConfig cfg)
      : model_id_(std::move(model_id)), cfg_(std::move(cfg)) {
    if (!cfg_.script.is_object() || !cfg_.script.contains("behaviors")) {
      throw ValidationError("mock_script", "mock script for '" + model_id_ +
                                               "' needs a behaviors table");
    }
  }

  const std::string& model_id() const override { return model_id_; }
  bool deterministic() const override { return true; }

  SampleBatch sample(const GenerationRequest& req, std::size_t n,
                     std::uint64_t seed) override {
    if (n == 0) fail_usage("sample: n must be at least 1");
    const Json& entry = rule_for(req.problem_id);
    const auto msgs = sample_messages(req.prompt);
    const std::string digest = prompt_digest(msgs);
    Rng rng(derive_seed(derive_seed(seed, model_id_), digest));

    SampleBatch batch;
    batch.usage.model_id = model_id_;
    for (std::size_t j = 0; j < n; ++j) {
      std::string behavior;
      if (entry.contains("sequence")) {
        const auto& seq = entry["sequence"];
        if (!seq.is_array() || seq.empty()) {
          throw ValidationError("mock_script", "empty sequence for '" + req.problem_id + "'");
        }
        behavior = seq[j % seq.size()].get<std::string>();
      } else {
        behavior = draw(entry, rng, req.problem_id);
      }
      CandidateProgram c = program_for(behavior);
      c.sample_id = req.id_prefix + "-" + std::to_string(j);
      batch.usage.prompt_tokens += approx_tokens(join_messages(msgs));
      batch.usage.completion_tokens += completion_tokens(behavior, c.source);
      batch.usage.calls += 1;
      batch.programs.push_back(std::move(c));
    }
    return batch;
  }

  Refinement refine(const GenerationRequest& req, const CandidateProgram& program,
                    const PassResult& feedback, const std::string& diagnostics,
                    std::size_t failure_cap) override {
    const Json& entry = rule_for(req.problem_id);
    const int step = program.refinement_step + 1;
    Refinement out;
    out.usage.model_id = model_id_;
    out.usage.calls = 1;
    out.usage.prompt_tokens = approx_tokens(join_messages(
        refine_messages(req.prompt, program, feedback, diagnostics, failure_cap)));
    std::string behavior;
    if (entry.contains("refine") && !entry["refine"].empty()) {
      const auto& seq = entry["refine"];
      const std::size_t k = std::min<std::size_t>(static_cast<std::size_t>(step - 1),
                                                  seq.size() - 1);
      behavior = seq[k].get<std::string>();
      out.program = program_for(behavior);
    } else {
      out.program = program;
      out.program.sequence_log_likelihood.reset();
      out.program.token_count.reset();
    }
    out.program.model_id = model_id_;
    out.program.sample_id = refined_id(program.sample_id, step);
    out.program.refinement_step = step;
    out.usage.completion_tokens = completion_tokens(behavior, out.program.source);
    return out;
  }

  GeneratedTests generate_tests(const GenerationRequest& req, std::size_t n,
                                std::size_t min_ok) override {
    const Json& entry = rule_for(req.problem_id);
    std::string completion;
    if (entry.contains("test_completion")) {
      completion = entry["test_completion"].get<std::string>();
    } else {
      for (const auto& t : entry.value("tests", Json::array())) {
        completion += "```input\n" + t.get<std::string>() + "```\n";
      }
    }
    GeneratedTests out = parse_test_completion(completion);
    if (out.tests.size() > n) out.tests.resize(n);
    out.usage.model_id = model_id_;
    out.usage.calls = 1;
    out.usage.prompt_tokens =
        approx_tokens(join_messages(test_generation_messages(req.prompt, n)));
    out.usage.completion_tokens = approx_tokens(completion);
    if (out.tests.size() < min_ok) {
      fail_domain("generate_tests: only " + std::to_string(out.tests.size()) +
                  " well-formed test inputs for '" + req.problem_id + "' (minimum " +
                  std::to_string(min_ok) + ")");
    }
    return out;
  }

 private:
  const Json& rule_for(const std::string& problem_id) const {
    const Json& s = cfg_.script;
    if (auto it = s.find("problems"); it != s.end() && it->contains(problem_id)) {
      return (*it)[problem_id];
    }
    if (auto it = s.find("default"); it != s.end()) return *it;
    throw ValidationError("mock_script", "mock '" + model_id_ + "' has no rule for '" +
                                             problem_id + "' and no default");
  }

  std::string draw(const Json& entry, Rng& rng, const std::string& pid) const {
    const Json& weights = entry.contains("sample") ? entry["sample"] : Json();
    if (!weights.is_object() || weights.empty()) {
      throw ValidationError("mock_script",
                            "rule for '" + pid + "' needs a sample weight table or sequence");
    }
    double total = 0.0;
    for (const auto& [b, w] : weights.items()) total += w.get<double>();
    double x = rng.uniform() * total;
    std::string last;
    for (const auto& [b, w] : weights.items()) {
      last = b;
      x -= w.get<double>();
      if (x < 0.0) return b;
    }
    return last;
  }

  CandidateProgram program_for(const std::string& behavior) const {
    const Json& table = cfg_.script["behaviors"];
    if (!table.contains(behavior)) {
      throw ValidationError("mock_script", "unknown behavior '" + behavior + "'");
    }
    const Json& b = table[behavior];
    CandidateProgram c;
    c.model_id = model_id_;
    c.source = b.at("source").get<std::string>();
    if (b.contains("sequence_log_likelihood")) {
      c.sequence_log_likelihood = b["sequence_log_likelihood"].get<double>();
      c.token_count = b.value("token_count", approx_tokens(c.source));
    }
    if (b.value("extraction_failed", false)) c.syntactically_valid = Validity::Invalid;
    return c;
  }

  std::int64_t completion_tokens(const std::string& behavior,
                                 const std::string& source) const {
    const Json& table = cfg_.script["behaviors"];
    if (!behavior.empty() && table.contains(behavior)) {
      const Json& b = table[behavior];
      if (b.contains("completion_tokens")) return b["completion_tokens"].get<std::int64_t>();
      if (b.contains("token_count")) return b["token_count"].get<std::int64_t>();
    }
    return approx_tokens(source);
  }

  std::string model_id_;
  MockConfig cfg_;
};

// ---- replay ---------------------------------------------------------------

class ReplayClient final : public ModelClient {
 public:
  ReplayClient(std::string model_id, const ReplayConfig& cfg)
      : model_id_(std::move(model_id)) {
    const std::string text = read_file(cfg.path);
    std::size_t line_no = 0;
    std::size_t pos = 0;
    while (pos < text.size()) {
      std::size_t end = text.find('\n', pos);
      if (end == std::string::npos) end = text.size();
      const std::string line = text.substr(pos, end - pos);
      pos = end + 1;
      ++line_no;
      if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
      try {
        Json j = Json::parse(line);
        if (j.contains("model_id") && j["model_id"] != model_id_) continue;
        const std::string key = j.at("call_kind").get<std::string>() + "/" +
                                j.at("prompt_digest").get<std::string>();
        for (auto& r : j.at("records")) store_[key].push_back(std::move(r));
      } catch (const Json::exception& e) {
        fail_domain("replay store '" + cfg.path + "' line " + std::to_string(line_no) +
                    ": " + e.what());
      }
    }
  }

  const std::string& model_id() const override { return model_id_; }
  bool deterministic() const override { return true; }

  SampleBatch sample(const GenerationRequest& req, std::size_t n, std::uint64_t) override {
    if (n == 0) fail_usage("sample: n must be at least 1");
    const auto recs = take("sample", prompt_digest(sample_messages(req.prompt)), n,
                           req.problem_id);
    SampleBatch batch;
    batch.usage.model_id = model_id_;
    for (std::size_t j = 0; j < recs.size(); ++j) {
      CandidateProgram c = to_program(recs[j]);
      c.sample_id = req.id_prefix + "-" + std::to_string(j);
      add_usage(batch.usage, recs[j], c.source);
      batch.programs.push_back(std::move(c));
    }
    return batch;
  }

  Refinement refine(const GenerationRequest& req, const CandidateProgram& program,
                    const PassResult& feedback, const std::string& diagnostics,
                    std::size_t failure_cap) override {
    const auto msgs = refine_messages(req.prompt, program, feedback, diagnostics, failure_cap);
    const auto recs = take("refine", prompt_digest(msgs), 1, req.problem_id);
    Refinement out;
    out.usage.model_id = model_id_;
    out.program = to_program(recs[0]);
    out.program.refinement_step = program.refinement_step + 1;
    out.program.sample_id = refined_id(program.sample_id, out.program.refinement_step);
    add_usage(out.usage, recs[0], out.program.source);
    return out;
  }

  GeneratedTests generate_tests(const GenerationRequest& req, std::size_t n,
                                std::size_t min_ok) override {
    const auto recs =
        take("generate_tests", prompt_digest(test_generation_messages(req.prompt, n)), 1,
             req.problem_id);
    const std::string completion = recs[0].at("completion").get<std::string>();
    GeneratedTests out = parse_test_completion(completion);
    if (out.tests.size() > n) out.tests.resize(n);
    out.usage.model_id = model_id_;
    add_usage(out.usage, recs[0], completion);
    if (out.tests.size() < min_ok) {
      fail_domain("generate_tests: only " + std::to_string(out.tests.size()) +
                  " well-formed test inputs (minimum " + std::to_string(min_ok) + ")");
    }
    return out;
  }

 private:
  std::vector<Json> take(const std::string& kind, const std::string& digest, std::size_t n,
                         const std::string& pid) {
    std::lock_guard lock(mu_);
    const std::string key = kind + "/" + digest;
    auto it = store_.find(key);
    std::size_t& cursor = cursor_[key];
    if (it == store_.end() || cursor + n > it->second.size()) {
      fail_domain("replay store exhausted for " + kind + " call on '" + pid + "' (model '" +
                  model_id_ + "', digest " + digest.substr(0, 12) + ")");
    }
    std::vector<Json> out(it->second.begin() + static_cast<std::ptrdiff_t>(cursor),
                          it->second.begin() + static_cast<std::ptrdiff_t>(cursor + n));
    cursor += n;
    return out;
  }

  CandidateProgram to_program(const Json& r) const {
    CandidateProgram c;
    c.model_id = model_id_;
    c.source = r.value("source", std::string());
    if (r.contains("sequence_log_likelihood") && !r["sequence_log_likelihood"].is_null()) {
      c.sequence_log_likelihood = r["sequence_log_likelihood"].get<double>();
      c.token_count = r.at("token_count").get<std::int64_t>();
    }
    if (r.contains("syntactically_valid") && !r["syntactically_valid"].is_null()) {
      c.syntactically_valid =
          r["syntactically_valid"].get<bool>() ? Validity::Valid : Validity::Invalid;
    }
    return c;
  }

  static void add_usage(GenerationUsage& u, const Json& r, std::string_view text) {
    u.calls += 1;
    u.prompt_tokens += r.value("prompt_tokens", std::int64_t{0});
    u.completion_tokens += r.value("completion_tokens", approx_tokens(text));
  }

  std::string model_id_;
  std::mutex mu_;
  std::map<std::string, std::vector<Json>> store_;
  std::map<std::string, std::size_t> cursor_;
};

// ---- live -----------------------------------------------------------------

struct Completion {
  std::string content;
  std::optional<double> log_likelihood;
  std::optional<std::int64_t> tokens;
};

class LiveClient final : public ModelClient {
 public:
  LiveClient(std::string model_id, LiveConfig cfg)
      : model_id_(std::move(model_id)),
        cfg_(std::move(cfg)),
        in_flight_(static_cast<std::ptrdiff_t>(std::max(1u, cfg_.max_in_flight))) {
    if (cfg_.remote_model.empty()) cfg_.remote_model = model_id_;
    const auto scheme_end = cfg_.base_url.find("://");
    if (scheme_end == std::string::npos) {
      fail_usage("live source '" + model_id_ + "': base_url needs a scheme");
    }
    const auto path_start = cfg_.base_url.find('/', scheme_end + 3);
    origin_ = cfg_.base_url.substr(0, path_start);
    path_prefix_ = path_start == std::string::npos ? "" : cfg_.base_url.substr(path_start);
    while (!path_prefix_.empty() && path_prefix_.back() == '/') path_prefix_.pop_back();
  }

  const std::string& model_id() const override { return model_id_; }
  bool deterministic() const override { return false; }

  SampleBatch sample(const GenerationRequest& req, std::size_t n,
                     std::uint64_t seed) override {
    if (n == 0) fail_usage("sample: n must be at least 1");
    const auto msgs = sample_messages(req.prompt);
    SampleBatch batch;
    batch.usage.model_id = model_id_;
    std::vector<Completion> completions;
    while (completions.size() < n) {
      auto got = chat(msgs, n - completions.size(), seed + completions.size(), batch.usage);
      if (got.empty()) fail_environment("live source '" + model_id_ + "' returned no choices");
      for (auto& c : got) {
        if (completions.size() < n) completions.push_back(std::move(c));
      }
    }
    Json records = Json::array();
    for (std::size_t j = 0; j < completions.size(); ++j) {
      CandidateProgram c = to_program(completions[j]);
      c.sample_id = req.id_prefix + "-" + std::to_string(j);
      records.push_back(record_of(c));
      batch.programs.push_back(std::move(c));
    }
    batch.usage.calls = static_cast<std::int64_t>(n);
    record("sample", msgs, records);
    return batch;
  }

  Refinement refine(const GenerationRequest& req, const CandidateProgram& program,
                    const PassResult& feedback, const std::string& diagnostics,
                    std::size_t failure_cap) override {
    const auto msgs = refine_messages(req.prompt, program, feedback, diagnostics, failure_cap);
    Refinement out;
    out.usage.model_id = model_id_;
    auto got = chat(msgs, 1, 0, out.usage);
    if (got.empty()) fail_environment("live source '" + model_id_ + "' returned no choices");
    out.program = to_program(got.front());
    out.program.refinement_step = program.refinement_step + 1;
    out.program.sample_id = refined_id(program.sample_id, out.program.refinement_step);
    out.usage.calls = 1;
    record("refine", msgs, Json::array({record_of(out.program)}));
    return out;
  }

  GeneratedTests generate_tests(const GenerationRequest& req, std::size_t n,
                                std::size_t min_ok) override {
    const auto msgs = test_generation_messages(req.prompt, n);
    GenerationUsage usage;
    usage.model_id = model_id_;
    auto got = chat(msgs, 1, 0, usage);
    if (got.empty()) fail_environment("live source '" + model_id_ + "' returned no choices");
    GeneratedTests out = parse_test_completion(got.front().content);
    if (out.tests.size() > n) out.tests.resize(n);
    usage.calls = 1;
    out.usage = usage;
    record("generate_tests", msgs, Json::array({Json{{"completion", got.front().content}}}));
    if (out.tests.size() < min_ok) {
      fail_domain("generate_tests: only " + std::to_string(out.tests.size()) +
                  " well-formed test inputs (minimum " + std::to_string(min_ok) + ")");
    }
    return out;
  }

 private:
  CandidateProgram to_program(const Completion& c) const {
    CandidateProgram p;
    p.model_id = model_id_;
    if (auto code = extract_code_block(c.content)) {
      p.source = *code;
    } else {
      p.source = c.content;
      if (!cfg_.whole_completion_fallback) p.syntactically_valid = Validity::Invalid;
    }
    if (c.log_likelihood && c.tokens && *c.tokens > 0) {
      p.sequence_log_likelihood = std::min(0.0, *c.log_likelihood);
      p.token_count = c.tokens;
    }
    return p;
  }

  static Json record_of(const CandidateProgram& c) {
    Json r{{"source", c.source}};
    if (c.sequence_log_likelihood) {
      r["sequence_log_likelihood"] = *c.sequence_log_likelihood;
      r["token_count"] = *c.token_count;
    }
    if (c.syntactically_valid == Validity::Invalid) r["syntactically_valid"] = false;
    return r;
  }

  void record(const char* kind, const std::vector<ChatMessage>& msgs, const Json& records) {
    if (cfg_.record_path.empty()) return;
    Json line{{"call_kind", kind},
              {"prompt_digest", prompt_digest(msgs)},
              {"model_id", model_id_},
              {"records", records}};
    std::lock_guard lock(record_mu_);
    std::ofstream out(cfg_.record_path, std::ios::app | std::ios::binary);
    out << line.dump() << '\n';
  }

  std::vector<Completion> chat(const std::vector<ChatMessage>& msgs, std::size_t n,
                               std::uint64_t seed, GenerationUsage& usage) {
    Json body{{"model", cfg_.remote_model},
              {"messages", messages_json(msgs)},
              {"temperature", cfg_.temperature},
              {"max_tokens", cfg_.max_tokens},
              {"n", n},
              {"seed", seed & 0x7fffffffULL}};
    if (cfg_.logprobs) body["logprobs"] = true;
    const std::string payload = body.dump();

    httplib::Headers headers;
    if (const char* token = std::getenv(cfg_.api_key_env.c_str()); token && *token) {
      headers.emplace("Authorization", std::string("Bearer ") + token);
    }
    const std::string path = path_prefix_ + "/v1/chat/completions";

    in_flight_.acquire();
    struct Release {
      std::counting_semaphore<>& s;
      ~Release() { s.release(); }
    } release{in_flight_};

    std::string last_error;
    for (int attempt = 0; attempt < std::max(1, cfg_.attempts); ++attempt) {
      if (attempt > 0) {
        std::this_thread::sleep_for(
            std::chrono::milliseconds(cfg_.backoff_ms * (std::int64_t{1} << (attempt - 1))));
      }
      httplib::Client client(origin_);
      const auto secs = cfg_.request_timeout_ms / 1000;
      const auto usecs = (cfg_.request_timeout_ms % 1000) * 1000;
      client.set_connection_timeout(secs, usecs);
      client.set_read_timeout(secs, usecs);
      client.set_write_timeout(secs, usecs);
      auto res = client.Post(path, headers, payload, "application/json");
      if (!res) {
        last_error = httplib::to_string(res.error());
        continue;
      }
      if (res->status == 429 || res->status >= 500) {
        last_error = "HTTP " + std::to_string(res->status);
        continue;
      }
      if (res->status != 200) {
        fail_environment("live source '" + model_id_ + "': HTTP " +
                         std::to_string(res->status) + ": " + res->body.substr(0, 300));
      }
      try {
        return parse_response(Json::parse(res->body), usage);
      } catch (const Json::exception& e) {
        fail_environment("live source '" + model_id_ + "': malformed response: " + e.what());
      }
    }
    fail_environment("live source '" + model_id_ + "': request failed after " +
                     std::to_string(cfg_.attempts) + " attempts (" + last_error + ")");
  }

  static std::vector<Completion> parse_response(const Json& j, GenerationUsage& usage) {
    std::vector<Completion> out;
    for (const auto& choice : j.at("choices")) {
      Completion c;
      const auto& msg = choice.at("message");
      c.content = msg.value("content", std::string());
      if (choice.contains("logprobs") && choice["logprobs"].is_object() &&
          choice["logprobs"].contains("content") && choice["logprobs"]["content"].is_array()) {
        double sum = 0.0;
        std::int64_t count = 0;
        for (const auto& tok : choice["logprobs"]["content"]) {
          sum += tok.at("logprob").get<double>();
          ++count;
        }
        if (count > 0) {
          c.log_likelihood = sum;
          c.tokens = count;
        }
      }
      out.push_back(std::move(c));
    }
    if (j.contains("usage") && j["usage"].is_object()) {
      usage.prompt_tokens += j["usage"].value("prompt_tokens", std::int64_t{0});
      usage.completion_tokens += j["usage"].value("completion_tokens", std::int64_t{0});
    }
    return out;
  }

  std::string model_id_;
  LiveConfig cfg_;
  std::string origin_;
  std::string path_prefix_;
  std::counting_semaphore<> in_flight_;
  std::mutex record_mu_;
};

}  // namespace

std::string_view ModelSource::kind() const {
  switch (config.index()) {
    case 0: return "live";
    case 1: return "replay";
    default: return "mock";
  }
}

ModelSource parse_model_source(const std::string& model_id, const Json& j,
                               const std::string& base_dir) {
  ModelSource s;
  s.model_id = model_id;
  const std::string kind = j.at("kind").get<std::string>();
  if (kind == "live") {
    LiveConfig c;
    c.base_url = j.at("base_url").get<std::string>();
    c.remote_model = j.value("remote_model", model_id);
    c.api_key_env = j.value("api_key_env", c.api_key_env);
    c.request_timeout_ms = j.value("request_timeout_ms", c.request_timeout_ms);
    c.temperature = j.value("temperature", c.temperature);
    c.max_tokens = j.value("max_tokens", c.max_tokens);
    c.logprobs = j.value("logprobs", c.logprobs);
    c.max_in_flight = j.value("max_in_flight", c.max_in_flight);
    c.attempts = j.value("attempts", c.attempts);
    c.backoff_ms = j.value("backoff_ms", c.backoff_ms);
    c.whole_completion_fallback = j.value("whole_completion_fallback", false);
    c.record_path = resolve_path(j.value("record_path", std::string()), base_dir);
    s.config = std::move(c);
  } else if (kind == "replay") {
    s.config = ReplayConfig{resolve_path(j.at("path").get<std::string>(), base_dir)};
  } else if (kind == "mock") {
    MockConfig c;
    c.seed = j.value("seed", std::uint64_t{0});
    if (j.contains("script")) {
      const Json& sc = j["script"];
      c.script = sc.is_string() ? Json::parse(read_file(resolve_path(sc.get<std::string>(), base_dir)))
                                : sc;
    } else {
      throw ValidationError("mock_script", "mock source '" + model_id + "' has no script");
    }
    s.config = std::move(c);
  } else {
    throw ValidationError("source_kind", "model '" + model_id + "' has unknown kind '" + kind +
                                             "' (expected live, replay or mock)");
  }
  return s;
}

GenerationUsage& GenerationUsage::operator+=(const GenerationUsage& o) {
  prompt_tokens += o.prompt_tokens;
  completion_tokens += o.completion_tokens;
  calls += o.calls;
  return *this;
}

std::unique_ptr<ModelClient> make_client(const ModelSource& source) {
  return std::visit(
      [&](const auto& cfg) -> std::unique_ptr<ModelClient> {
        using T = std::decay_t<decltype(cfg)>;
        if constexpr (std::is_same_v<T, LiveConfig>) {
          return std::make_unique<LiveClient>(source.model_id, cfg);
        } else if constexpr (std::is_same_v<T, ReplayConfig>) {
          return std::make_unique<ReplayClient>(source.model_id, cfg);
        } else {
          return std::make_unique<MockClient>(source.model_id, cfg);
        }
      },
      source.config);
}

// ---- prompts --------------------------------------------------------------

std::vector<ChatMessage> sample_messages(const std::string& problem_prompt) {
  return {
      {"system",
       "You are an expert competitive programmer. Write a complete program that "
       "reads from standard input and writes to standard output."},
      {"user", problem_prompt +
                   "\n\nReturn the complete program in a single fenced code block."},
  };
}

std::vector<ChatMessage> refine_messages(const std::string& problem_prompt,
                                         const CandidateProgram& program,
                                         const PassResult& feedback,
                                         const std::string& diagnostics,
                                         std::size_t failure_cap) {
  std::string u = problem_prompt;
  u += "\n\nYour previous program:\n```\n" + program.source + "\n```\n";
  u += "\nIt failed " + std::to_string(feedback.failed) + " of " +
       std::to_string(feedback.passed + feedback.failed) + " public tests.\n";
  const std::size_t shown = std::min(failure_cap, feedback.failures.size());
  for (std::size_t i = 0; i < shown; ++i) {
    const FailedTest& f = feedback.failures[i];
    u += "\n### Failing case " + std::to_string(i + 1) + "\nInput:\n```\n" + f.input +
         "\n```\nExpected output:\n```\n" + f.expected + "\n```\nGot " + describe(f.got) + "\n";
  }
  if (!diagnostics.empty()) u += "\nDiagnostics:\n```\n" + diagnostics + "\n```\n";
  u += "\nFix the program. Return the complete corrected program in a single fenced code "
       "block.";
  return {
      {"system",
       "You are an expert competitive programmer debugging your own solution."},
      {"user", u},
  };
}

std::vector<ChatMessage> test_generation_messages(const std::string& problem_prompt,
                                                  std::size_t n) {
  return {
      {"system", "You write test inputs for competitive programming problems."},
      {"user", problem_prompt + "\n\nWrite " + std::to_string(n) +
                   " distinct valid test inputs for this problem, covering edge cases. "
                   "Put each input in its own fenced block tagged input:\n```input\n"
                   "...\n```"},
  };
}

std::string prompt_digest(const std::vector<ChatMessage>& messages) {
  return sha256_hex(canonical_json(messages_json(messages)));
}

std::optional<std::string> extract_code_block(const std::string& completion) {
  const std::size_t open = completion.find("```");
  if (open == std::string::npos) return std::nullopt;
  const std::size_t body = completion.find('\n', open);
  if (body == std::string::npos) return std::nullopt;
  std::size_t close = completion.find("\n```", body);
  if (close == std::string::npos) {
    // tolerate a fence opened on the last line with an empty body
    if (completion.compare(body + 1, 3, "```") == 0) return std::string();
    return std::nullopt;
  }
  return completion.substr(body + 1, close + 1 - (body + 1));
}

GeneratedTests parse_test_completion(const std::string& completion) {
  GeneratedTests out;
  std::set<std::string> seen;
  std::size_t pos = 0;
  const std::string tag = "```input";
  while ((pos = completion.find(tag, pos)) != std::string::npos) {
    const std::size_t body = completion.find('\n', pos);
    if (body == std::string::npos) {
      ++out.dropped;
      break;
    }
    const std::size_t close = completion.find("```", body + 1);
    if (close == std::string::npos) {
      ++out.dropped;
      break;
    }
    std::string input = completion.substr(body + 1, close - (body + 1));
    pos = close + 3;
    if (input.find_first_not_of(" \t\r\n") == std::string::npos) {
      ++out.dropped;
      continue;
    }
    if (!seen.insert(input).second) continue;
    TestCase t;
    t.test_id = "g" + std::to_string(out.tests.size() + 1);
    t.input = std::move(input);
    out.tests.push_back(std::move(t));
  }
  return out;
}

}  // namespace esekit

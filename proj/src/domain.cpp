#include "esekit/domain.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <set>

#include "esekit/error.hpp"
#include "esekit/util.hpp"

namespace esekit {

namespace {

std::string utc_now() {
  const std::time_t t = std::chrono::system_clock::to_time_t(
      std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

void check_schema_version(const Json& j) {
  if (auto it = j.find("schema_version"); it != j.end()) {
    if (!it->is_number_integer() || it->get<int>() != kSchemaVersion) {
      throw ValidationError("schema_version",
                            "unsupported schema_version " + it->dump());
    }
  }
}

template <class T>
std::optional<T> optional_field(const Json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end() || it->is_null()) return std::nullopt;
  return it->get<T>();
}

// Runs fn for each non-blank line; wraps failures with the line number.
template <class Fn>
void for_each_line(std::string_view text, Fn&& fn) {
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string_view::npos) continue;
    const std::string where = "line " + std::to_string(line_no) + ": ";
    Json j;
    try {
      j = Json::parse(line);
    } catch (const Json::parse_error& e) {
      fail_domain(where + "parse error: " + e.what());
    }
    try {
      fn(j, line_no);
    } catch (const ValidationError& e) {
      throw ValidationError(e.invariant(), where + e.detail());
    } catch (const Json::exception& e) {
      fail_domain(where + "malformed record: " + e.what());
    }
  }
}

void append_canonical(std::string& out, const Json& j) {
  switch (j.type()) {
    case Json::value_t::object: {
      out.push_back('{');
      bool first = true;
      for (auto it = j.begin(); it != j.end(); ++it) {
        if (!first) out.push_back(',');
        first = false;
        out += Json(it.key()).dump();
        out.push_back(':');
        append_canonical(out, it.value());
      }
      out.push_back('}');
      break;
    }
    case Json::value_t::array: {
      out.push_back('[');
      bool first = true;
      for (const auto& v : j) {
        if (!first) out.push_back(',');
        first = false;
        append_canonical(out, v);
      }
      out.push_back(']');
      break;
    }
    case Json::value_t::number_float: {
      const double v = j.get<double>();
      if (!std::isfinite(v)) {
        fail_domain("canonical JSON: non-finite number (NaN/inf) is forbidden");
      }
      char buf[40];
      std::snprintf(buf, sizeof buf, "%.12g", v == 0.0 ? 0.0 : v);
      out += buf;
      break;
    }
    default:
      out += j.dump(-1, ' ', false, Json::error_handler_t::strict);
  }
}

}  // namespace

std::string_view to_string(Validity v) {
  switch (v) {
    case Validity::Valid: return "valid";
    case Validity::Invalid: return "invalid";
    default: return "unknown";
  }
}

std::map<std::string, std::string> SampleSet::model_of() const {
  std::map<std::string, std::string> out;
  for (const auto& s : samples) out.emplace(s.sample_id, s.model_id);
  return out;
}

const CandidateProgram* SampleSet::find(std::string_view sample_id) const {
  for (const auto& s : samples) {
    if (s.sample_id == sample_id) return &s;
  }
  return nullptr;
}

std::vector<const CandidateProgram*> SampleSet::of_model(
    std::string_view model) const {
  std::vector<const CandidateProgram*> out;
  for (const auto& s : samples) {
    if (s.model_id == model) out.push_back(&s);
  }
  return out;
}

SampleSet make_sample_set(std::string problem_id,
                          std::vector<CandidateProgram> samples) {
  SampleSet set;
  set.problem_id = std::move(problem_id);
  set.samples = std::move(samples);
  for (const auto& s : set.samples) {
    set.grouping[s.model_id].push_back(s.sample_id);
  }
  return set;
}

RunManifest make_manifest(const Json& config, std::uint64_t seed) {
  RunManifest m;
  m.config_digest = sha256_hex(canonical_json(config));
  m.rng_seed = seed;
  m.started_at = utc_now();
  m.tool_version = std::string(kToolVersion);
  return m;
}

// ---- validation -----------------------------------------------------------

void validate(const TestCase& t, bool expected_required) {
  if (t.test_id.empty()) {
    throw ValidationError("test_id_nonempty", "test case without test_id");
  }
  if (expected_required && !t.expected_output) {
    throw ValidationError("expected_output_required",
                          "test '" + t.test_id + "' has no expected_output");
  }
}

namespace {
void validate_suite(const std::vector<TestCase>& suite, const char* name,
                    bool expected_required) {
  std::set<std::string_view> ids;
  for (const auto& t : suite) {
    validate(t, expected_required);
    if (!ids.insert(t.test_id).second) {
      throw ValidationError("unique_test_id", std::string(name) +
                                                  " suite repeats test_id '" +
                                                  t.test_id + "'");
    }
  }
}
}  // namespace

void validate(const ProblemBundle& b, const BundleLoadOptions& opts) {
  if (b.problem_id.empty()) {
    throw ValidationError("problem_id_nonempty", "bundle without problem_id");
  }
  if (b.language_profile_id.empty()) {
    throw ValidationError("language_profile_nonempty",
                          "bundle '" + b.problem_id +
                              "' has no language_profile_id");
  }
  validate_suite(b.public_tests, "public", true);
  validate_suite(b.generated_tests, "generated", false);
  validate_suite(b.hidden_tests, "hidden", true);
  if (opts.strict && b.generated_tests.empty()) {
    throw ValidationError("generated_tests_nonempty",
                          "bundle '" + b.problem_id +
                              "' has no generated tests to cluster on");
  }
}

void validate(const CandidateProgram& c) {
  if (c.sample_id.empty()) {
    throw ValidationError("sample_id_nonempty", "sample without sample_id");
  }
  if (c.model_id.empty()) {
    throw ValidationError("model_id_nonempty",
                          "sample '" + c.sample_id + "' has no model_id");
  }
  if (c.token_count && *c.token_count <= 0) {
    throw ValidationError("token_count_positive",
                          "sample '" + c.sample_id + "' has token_count " +
                              std::to_string(*c.token_count));
  }
  if (c.sequence_log_likelihood) {
    if (!c.token_count) {
      throw ValidationError("token_count_with_log_likelihood",
                            "sample '" + c.sample_id +
                                "' has sequence_log_likelihood but no "
                                "token_count");
    }
    const double ll = *c.sequence_log_likelihood;
    if (!std::isfinite(ll) || ll > 0.0) {
      throw ValidationError("log_likelihood_nonpositive",
                            "sample '" + c.sample_id +
                                "' has sequence_log_likelihood " +
                                std::to_string(ll));
    }
  }
}

void validate(const SampleSet& s,
              const std::map<std::string, std::size_t>* plan) {
  std::map<std::string_view, std::string_view> model_by_id;
  for (const auto& c : s.samples) {
    validate(c);
    if (!model_by_id.emplace(c.sample_id, c.model_id).second) {
      throw ValidationError("unique_sample_id",
                            "problem '" + s.problem_id +
                                "' repeats sample_id '" + c.sample_id + "'");
    }
  }
  std::set<std::string_view> grouped;
  for (const auto& [model, ids] : s.grouping) {
    for (const auto& id : ids) {
      auto it = model_by_id.find(id);
      if (it == model_by_id.end() || it->second != model ||
          !grouped.insert(id).second) {
        throw ValidationError("sample_in_one_group",
                              "sample '" + id + "' is not grouped exactly "
                                                "once under its model");
      }
    }
  }
  if (grouped.size() != s.samples.size()) {
    throw ValidationError("sample_in_one_group",
                          "problem '" + s.problem_id +
                              "' has samples missing from the model grouping");
  }
  if (plan) {
    for (const auto& [model, want] : *plan) {
      auto it = s.grouping.find(model);
      const std::size_t got = it == s.grouping.end() ? 0 : it->second.size();
      if (got != want) {
        throw ValidationError(
            "sampling_plan", "problem '" + s.problem_id + "' has " +
                                 std::to_string(got) + " samples from '" +
                                 model + "', plan declares " +
                                 std::to_string(want));
      }
    }
    for (const auto& [model, ids] : s.grouping) {
      if (!plan->count(model)) {
        throw ValidationError("sampling_plan",
                              "model '" + model + "' is not in the plan");
      }
    }
  }
}

// ---- JSON conversions -----------------------------------------------------

void to_json(Json& j, const TestCase& t) {
  j = Json{{"test_id", t.test_id}, {"input", t.input}};
  if (t.expected_output) j["expected_output"] = *t.expected_output;
}

void from_json(const Json& j, TestCase& t) {
  t.test_id = j.at("test_id").get<std::string>();
  t.input = j.at("input").get<std::string>();
  t.expected_output = optional_field<std::string>(j, "expected_output");
}

void to_json(Json& j, const ProblemBundle& b) {
  j = Json{{"schema_version", kSchemaVersion},
           {"problem_id", b.problem_id},
           {"prompt", b.prompt},
           {"public_tests", b.public_tests},
           {"generated_tests", b.generated_tests},
           {"hidden_tests", b.hidden_tests},
           {"language_profile_id", b.language_profile_id}};
  if (!b.metadata.empty()) j["metadata"] = b.metadata;
}

void from_json(const Json& j, ProblemBundle& b) {
  check_schema_version(j);
  b.problem_id = j.at("problem_id").get<std::string>();
  b.prompt = j.value("prompt", std::string());
  b.public_tests = j.value("public_tests", std::vector<TestCase>{});
  b.generated_tests = j.value("generated_tests", std::vector<TestCase>{});
  b.hidden_tests = j.value("hidden_tests", std::vector<TestCase>{});
  b.language_profile_id = j.at("language_profile_id").get<std::string>();
  b.metadata = j.value("metadata", Json::object());
}

void to_json(Json& j, const CandidateProgram& c) {
  j = Json{{"sample_id", c.sample_id},
           {"model_id", c.model_id},
           {"source", c.source}};
  if (c.sequence_log_likelihood) {
    j["sequence_log_likelihood"] = *c.sequence_log_likelihood;
  }
  if (c.token_count) j["token_count"] = *c.token_count;
  if (c.syntactically_valid != Validity::Unknown) {
    j["syntactically_valid"] = c.syntactically_valid == Validity::Valid;
  }
  if (c.refinement_step != 0) j["refinement_step"] = c.refinement_step;
}

void from_json(const Json& j, CandidateProgram& c) {
  c.sample_id = j.at("sample_id").get<std::string>();
  c.model_id = j.at("model_id").get<std::string>();
  c.source = j.at("source").get<std::string>();
  c.sequence_log_likelihood =
      optional_field<double>(j, "sequence_log_likelihood");
  c.token_count = optional_field<std::int64_t>(j, "token_count");
  const auto valid = optional_field<bool>(j, "syntactically_valid");
  c.syntactically_valid =
      !valid ? Validity::Unknown : (*valid ? Validity::Valid : Validity::Invalid);
  c.refinement_step = j.value("refinement_step", 0);
}

void to_json(Json& j, const RunManifest& m) {
  j = Json{{"config_digest", m.config_digest},
           {"rng_seed", m.rng_seed},
           {"started_at", m.started_at},
           {"finished_at", m.finished_at},
           {"tool_version", m.tool_version}};
}

// ---- JSONL ----------------------------------------------------------------

std::vector<ProblemBundle> parse_bundles(std::string_view jsonl,
                                         const BundleLoadOptions& opts) {
  std::vector<ProblemBundle> out;
  std::set<std::string> seen;
  for_each_line(jsonl, [&](const Json& j, std::size_t) {
    ProblemBundle b = j.get<ProblemBundle>();
    validate(b, opts);
    if (!seen.insert(b.problem_id).second) {
      throw ValidationError("unique_problem_id",
                            "duplicate problem_id '" + b.problem_id + "'");
    }
    out.push_back(std::move(b));
  });
  return out;
}

std::vector<ProblemBundle> load_bundles(const std::string& path,
                                        const BundleLoadOptions& opts) {
  return parse_bundles(read_file(path), opts);
}

std::vector<SampleSet> parse_samples(std::string_view jsonl,
                                     const SampleLoadOptions& opts) {
  std::set<std::string> known;
  if (opts.corpus) {
    for (const auto& b : *opts.corpus) known.insert(b.problem_id);
  }
  std::vector<SampleSet> out;
  std::map<std::string, std::size_t> index;
  for_each_line(jsonl, [&](const Json& j, std::size_t) {
    check_schema_version(j);
    const std::string pid = j.at("problem_id").get<std::string>();
    if (opts.corpus && !known.count(pid)) {
      throw ValidationError("known_problem_id",
                            "sample references unknown problem_id '" + pid +
                                "'");
    }
    CandidateProgram c = j.get<CandidateProgram>();
    validate(c);
    auto [it, inserted] = index.emplace(pid, out.size());
    if (inserted) {
      out.emplace_back();
      out.back().problem_id = pid;
    }
    SampleSet& set = out[it->second];
    set.grouping[c.model_id].push_back(c.sample_id);
    set.samples.push_back(std::move(c));
  });
  for (const auto& s : out) validate(s, opts.plan);
  return out;
}

std::vector<SampleSet> load_samples(const std::string& path,
                                    const SampleLoadOptions& opts) {
  return parse_samples(read_file(path), opts);
}

std::string dump_bundles(const std::vector<ProblemBundle>& bundles) {
  std::string out;
  for (const auto& b : bundles) {
    out += canonical_json(Json(b));
    out.push_back('\n');
  }
  return out;
}

std::string dump_samples(const std::vector<SampleSet>& sets) {
  std::string out;
  for (const auto& set : sets) {
    for (const auto& c : set.samples) {
      Json j = c;
      j["problem_id"] = set.problem_id;
      j["schema_version"] = kSchemaVersion;
      out += canonical_json(j);
      out.push_back('\n');
    }
  }
  return out;
}

std::string canonical_json(const Json& j) {
  std::string out;
  append_canonical(out, j);
  return out;
}

void write_report(const Json& report, const std::string& path) {
  std::string text = canonical_json(report);
  text.push_back('\n');
  write_file(path, text);
}

}  // namespace esekit

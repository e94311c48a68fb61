#include <cmath>

#include "doctest.h"
#include "esekit/error.hpp"
#include "esekit/workflows.hpp"
#include "support.hpp"

using namespace esekit;
using testing::TempDir;

namespace {

const char* kAdd = "read a b\necho $((a + b))\n";
const char* kSub = "read a b\necho $((a - b))\n";

ProblemBundle problem(const std::string& pid) {
  ProblemBundle b;
  b.problem_id = pid;
  b.prompt = "Print a+b.";
  b.language_profile_id = "sh";
  b.public_tests = testing::io({{"1 2\n", "3"}});
  b.generated_tests = testing::inputs({"5 7\n", "2 2\n"});
  b.hidden_tests = testing::io({{"4 4\n", "8"}, {"9 1\n", "10"}}, "h");
  return b;
}

// Model A: three identical wrong programs. Model B: two identical right ones.
SampleSet overconfident(const std::string& pid) {
  std::vector<CandidateProgram> s;
  for (int i = 0; i < 3; ++i) s.push_back(testing::program(pid + "-A" + std::to_string(i), "A", kSub));
  for (int i = 0; i < 2; ++i) s.push_back(testing::program(pid + "-B" + std::to_string(i), "B", kAdd));
  return make_sample_set(pid, s);
}

SampleSet unanimous(const std::string& pid, const char* src) {
  std::vector<CandidateProgram> s;
  for (int i = 0; i < 2; ++i) s.push_back(testing::program(pid + "-A" + std::to_string(i), "A", src));
  for (int i = 0; i < 2; ++i) s.push_back(testing::program(pid + "-B" + std::to_string(i), "B", src));
  return make_sample_set(pid, s);
}

struct Env {
  Harness harness;
  std::map<std::string, LanguageProfile> profiles = builtin_profiles();
};

}  // namespace

TEST_CASE("scoring the overconfident-model corpus") {
  Env env;
  const Json rec = score_problem(problem("p"), overconfident("p"), env.profiles.at("sh"), env.harness, {});
  CHECK(rec["scores"]["dse:A"].get<double>() == 0.0);
  CHECK(std::abs(rec["scores"]["edse"].get<double>() - std::log(2.0)) < 1e-12);
  CHECK(rec["mean_correctness"].get<double>() == doctest::Approx(0.4));
  CHECK(rec["mean_correctness_per_model"]["A"].get<double>() == 0.0);
  // single-model A is confidently wrong
  CHECK(rec["labels"]["dse:A"] == false);
  CHECK(rec["labels"]["dse:B"] == true);
  CHECK(rec["selected"]["ensemble"] == "p-A0");
}

TEST_CASE("graybox mode needs likelihoods") {
  try {
    require_likelihoods({overconfident("p")});
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Domain);
    CHECK(std::string(e.what()).find("blackbox") != std::string::npos);
  }
}

TEST_CASE("invalid samples are dropped or clustered together") {
  Env env;
  auto set = overconfident("p");
  set.samples.push_back(testing::program("p-B9", "B", "if then (\n"));
  set = make_sample_set("p", set.samples);
  const Json dropped = score_problem(problem("p"), set, env.profiles.at("sh"), env.harness, {});
  CHECK(dropped["report"]["cluster_count"] == 2);
  CHECK(dropped["samples"]["p-B9"]["valid"] == false);

  ScoreOptions o;
  o.invalid_as_cluster = true;
  const Json kept = score_problem(problem("p"), set, env.profiles.at("sh"), env.harness, o);
  CHECK(kept["report"]["cluster_count"] == 3);
  bool sentinel = false;
  for (const auto& c : kept["clusters"]["clusters"]) sentinel |= c["cluster_id"] == "invalid";
  CHECK(sentinel);
}

TEST_CASE("score corpus collects failures and correlations") {
  Env env;
  std::vector<ProblemBundle> bundles;
  std::vector<SampleSet> sets;
  for (int i = 0; i < 4; ++i) {
    const std::string pid = "q" + std::to_string(i);
    bundles.push_back(problem(pid));
    sets.push_back(i % 2 ? overconfident(pid) : unanimous(pid, i == 0 ? kAdd : kSub));
  }
  bundles.push_back(problem("broken"));
  bundles.back().language_profile_id = "cobol";
  sets.push_back(unanimous("broken", kAdd));
  const ScoreRun run = score_corpus(bundles, sets, env.profiles, env.harness, {});
  CHECK(run.records.size() == 4);
  REQUIRE(run.failures.size() == 1);
  CHECK(run.failures[0].first == "broken");
  CHECK(run.summary["correlation_with_mean_correctness"].contains("edse"));
}

TEST_CASE("calibration on separable records") {
  std::vector<Json> recs;
  for (int i = 0; i < 10; ++i) {
    const bool pass = i < 5;
    recs.push_back(Json{{"problem_id", "p" + std::to_string(i)},
                        {"scores", {{"edse", pass ? 0.1 * i : 1.0 + i}}},
                        {"labels", {{"edse", pass}}}});
  }
  const Json cal = calibrate(recs, {0.05, 0.1});
  const auto& pts = cal["methods"]["edse"]["operating_points"];
  REQUIRE(pts.size() == 2);
  for (const auto& p : pts) {
    CHECK(p["tpr"] == 1.0);
    CHECK(p["fpr"] == 0.0);
    CHECK(p["accuracy"] == 1.0);
  }
  // the reported threshold reproduces the operating point verbatim
  const double tau = pts[0]["threshold"].get<double>();
  std::vector<double> u;
  std::vector<bool> y;
  for (const auto& r : recs) u.push_back(r["scores"]["edse"]), y.push_back(r["labels"]["edse"]);
  CHECK(accuracy_at(u, y, tau) == 1.0);
}

TEST_CASE("selection accepts and abstains") {
  Env env;
  const Json calm = score_problem(problem("a"), unanimous("a", kAdd), env.profiles.at("sh"), env.harness, {});
  const Selection s = select_from_record(calm, "normalized_u", 0.1, SelectionRule::Longest, 0);
  CHECK(s.accepted);
  CHECK(s.source == kAdd);

  const Json split = score_problem(problem("b"), overconfident("b"), env.profiles.at("sh"), env.harness, {});
  const Selection no = select_from_record(split, "normalized_u", 0.3, SelectionRule::Longest, 0);
  CHECK_FALSE(no.accepted);
  CHECK(std::abs(no.u - 1.0) < 1e-12);
  CHECK_FALSE(no.reason.empty());

  // per-model selection sees only that model's samples
  const Selection b = select_from_record(split, "dse:B", 0.1, SelectionRule::Longest, 0);
  CHECK(b.accepted);
  CHECK(b.sample_id.find("-B") != std::string::npos);
}

TEST_CASE("cluster analysis") {
  Env env;
  std::vector<ProblemBundle> bundles;
  std::vector<SampleSet> sets;
  for (int i = 0; i < 3; ++i) {
    const std::string pid = "c" + std::to_string(i);
    bundles.push_back(problem(pid));
    std::vector<CandidateProgram> s;
    for (int j = 0; j < 6; ++j) s.push_back(testing::program(pid + "-A" + std::to_string(j), "A", kSub));
    for (int j = 0; j < 6; ++j) {
      s.push_back(testing::program(pid + "-B" + std::to_string(j), "B",
                                   j % 2 ? kAdd : "read a b\necho $((a * b))\n"));
    }
    sets.push_back(make_sample_set(pid, s));
  }
  ClusterAnalysisOptions o;
  o.k = 5;
  const Json out = analyze_clusters(bundles, sets, env.profiles, env.harness, o);
  CHECK(out["per_model"]["A"]["fraction_at_least_k"] == 1.0);
  CHECK(out["ensemble"]["fraction_at_least_k"] == 0.0);

  o.k = 13;
  const Json none = analyze_clusters(bundles, sets, env.profiles, env.harness, o);
  CHECK(none["per_model"]["A"]["fraction_at_least_k"] == 0.0);
}

TEST_CASE("cascade corpus resumes from the log") {
  TempDir dir;
  Env env;
  const Json script{{"behaviors", {{"add", {{"source", kAdd}}}}}, {"default", {{"sequence", {"add"}}}}};
  const Json cfg_json{{"seed", 1},
                      {"models", {{"m", {{"kind", "mock"}, {"script", script}}}}},
                      {"cost_model", {{"m", 1e9}}},
                      {"layers", Json::array({Json{{"ensemble", Json::array({Json{{"model", "m"}, {"samples", 2}}})},
                                                   {"debug_steps", 0},
                                                   {"alpha", 0.5}}})}};
  const auto cfg = parse_cascade_config(cfg_json, "");
  std::vector<ProblemBundle> corpus{problem("x"), problem("y"), problem("z")};

  CascadeRunOptions o;
  o.results_path = dir / "log.jsonl";
  const CascadeRun full = run_cascade_corpus(corpus, cfg, env.profiles, env.harness, o);
  CHECK(full.records.size() == 3);
  const std::string complete = read_file(o.results_path);

  // cut the log after the first record and half of the second
  const std::size_t first_end = complete.find('\n') + 1;
  write_file(o.results_path, complete.substr(0, first_end + 20));
  o.resume = true;
  const CascadeRun resumed = run_cascade_corpus(corpus, cfg, env.profiles, env.harness, o);
  CHECK(resumed.skipped == 1);
  CHECK(read_file(o.results_path) == complete);
  CHECK(canonical_json(Json(resumed.summary)) == canonical_json(Json(full.summary)));
}

TEST_CASE("jsonl parsing reports the line") {
  try {
    parse_jsonl("{}\n{oops\n", "f.jsonl");
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(std::string(e.what()).find("line 2") != std::string::npos);
  }
  CHECK(parse_jsonl("\n{}\n\n", "x").size() == 1);
}

#include "esekit/workflows.hpp"

#include <algorithm>
#include <cmath>
#include <ctime>
#include <fstream>
#include <set>

#include "esekit/error.hpp"
#include "esekit/util.hpp"

namespace esekit {

namespace {

std::string utc_timestamp() {
  std::time_t t = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

const LanguageProfile& profile_of(const std::map<std::string, LanguageProfile>& profiles,
                                  const ProblemBundle& b) {
  auto it = profiles.find(b.language_profile_id);
  if (it == profiles.end()) {
    fail_domain("problem '" + b.problem_id + "' uses unknown language profile '" +
                b.language_profile_id + "'");
  }
  return it->second;
}

bool is_ensemble_method(const std::string& m) {
  return m == "edse" || m == "ese" || m == "normalized_u" || m == "pe";
}

// "dse:A" -> "A"; empty for ensemble methods.
std::string method_model(const std::string& m) {
  const auto colon = m.find(':');
  return colon == std::string::npos ? std::string() : m.substr(colon + 1);
}

std::string label_key(const std::string& method) {
  return is_ensemble_method(method) ? "ensemble" : "model:" + method_model(method);
}

void check_syntax_all(std::vector<CandidateProgram>& samples, const LanguageProfile& profile,
                      Harness& harness, unsigned jobs) {
  if (profile.syntax_check_command.empty()) return;
  parallel_for(samples.size(), jobs, [&](std::size_t i) {
    if (samples[i].syntactically_valid == Validity::Unknown) {
      harness.check_syntax_in_place(samples[i], profile);
    }
  });
}

}  // namespace

std::vector<Json> parse_jsonl(std::string_view text, const std::string& what) {
  std::vector<Json> out;
  std::size_t pos = 0, line_no = 0;
  while (pos < text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    const std::string_view line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string_view::npos) continue;
    try {
      out.push_back(Json::parse(line));
    } catch (const Json::parse_error& e) {
      fail_domain(what + " line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

std::vector<Json> read_jsonl(const std::string& path) { return parse_jsonl(read_file(path), path); }

std::string to_jsonl(const std::vector<Json>& records) {
  std::string out;
  for (const auto& r : records) {
    out += canonical_json(r);
    out.push_back('\n');
  }
  return out;
}

// ---- score ----------------------------------------------------------------

void require_likelihoods(const std::vector<SampleSet>& sets) {
  for (const auto& s : sets) {
    for (const auto& c : s.samples) {
      if (!c.sequence_log_likelihood || !c.token_count) {
        fail_domain("--mode graybox needs sequence_log_likelihood and token_count on every "
                    "sample, but sample '" + c.sample_id + "' of problem '" + s.problem_id +
                    "' has none; rerun with --mode blackbox for frequency-based scores");
      }
    }
  }
}

Json score_problem(const ProblemBundle& bundle, const SampleSet& set,
                   const LanguageProfile& profile, Harness& harness, const ScoreOptions& opts) {
  if (bundle.generated_tests.empty()) {
    throw ValidationError("generated_tests_nonempty",
                          "problem '" + bundle.problem_id + "' has no generated tests");
  }
  const unsigned jobs = std::max(1u, opts.jobs);
  std::vector<CandidateProgram> all = set.samples;
  check_syntax_all(all, profile, harness, jobs);

  std::vector<CandidateProgram> valid;
  std::set<std::string> invalid_ids;
  for (const auto& c : all) {
    if (c.syntactically_valid != Validity::Invalid) {
      valid.push_back(c);
    } else if (opts.invalid_as_cluster) {
      valid.push_back(c);
      invalid_ids.insert(c.sample_id);
    }
  }
  if (valid.size() == invalid_ids.size()) {
    fail_domain("problem '" + bundle.problem_id + "': no syntactically valid samples");
  }

  std::vector<BehaviorFingerprint> fps(valid.size());
  parallel_for(valid.size(), jobs, [&](std::size_t i) {
    if (invalid_ids.count(valid[i].sample_id)) {
      // never executed; the outcomes only keep the vector lengths aligned
      fps[i].sample_id = valid[i].sample_id;
      fps[i].outcomes.assign(bundle.generated_tests.size(), TestOutcome::runtime_error(std::nullopt));
      return;
    }
    fps[i] = harness.execute_on_tests(valid[i], bundle.generated_tests, profile);
  });
  const SampleSet vset = make_sample_set(bundle.problem_id, valid);
  const auto model_of = vset.model_of();
  const EquivalenceKey digest = functional_equivalence();
  const SemanticPartition part =
      partition(fps, model_of, [&](const BehaviorFingerprint& fp) {
        return invalid_ids.count(fp.sample_id) ? std::string(kInvalidClusterId) : digest(fp);
      });
  const UncertaintyReport report = uncertainty_report(vset, part, opts.mode);

  Json scores{{"edse", report.edse}, {"normalized_u", report.normalized_u}};
  if (report.ese) scores["ese"] = *report.ese;
  if (report.pe) scores["pe"] = *report.pe;
  for (const auto& [m, v] : report.dse_per_model) scores["dse:" + m] = v;
  for (const auto& [m, v] : report.se_per_model) scores["se:" + m] = v;

  const std::uint64_t seed = derive_seed(opts.seed, bundle.problem_id);
  Json selected{{"ensemble", select_program(part, vset, opts.rule, seed).sample_id}};
  for (const auto& [m, v] : report.dse_per_model) {
    const SemanticPartition mp = restrict_to_model(part, model_of, m);
    selected["model:" + m] = select_program(mp, vset, opts.rule, seed).sample_id;
  }

  Json samples = Json::object();
  Json sources = Json::object();
  for (const auto& c : all) {
    samples[c.sample_id] = {{"model_id", c.model_id},
                            {"valid", c.syntactically_valid != Validity::Invalid},
                            {"source_bytes", c.source.size()}};
    sources[c.sample_id] = c.source;
  }

  Json rec{{"schema_version", kSchemaVersion},
           {"problem_id", bundle.problem_id},
           {"mode", to_string(opts.mode)},
           {"report", report},
           {"clusters", part},
           {"scores", scores},
           {"selected", selected},
           {"samples", samples},
           {"sources", sources}};

  if (!bundle.hidden_tests.empty()) {
    std::vector<double> correctness(all.size());
    parallel_for(all.size(), jobs, [&](std::size_t i) {
      correctness[i] = harness.correctness_score(all[i], bundle.hidden_tests, profile);
    });
    std::map<std::string, double> by_id;
    std::map<std::string, std::vector<double>> per_model;
    for (std::size_t i = 0; i < all.size(); ++i) {
      by_id[all[i].sample_id] = correctness[i];
      per_model[all[i].model_id].push_back(correctness[i]);
      rec["samples"][all[i].sample_id]["correctness"] = correctness[i];
    }
    rec["mean_correctness"] = mean_correctness(correctness);
    Json pm = Json::object();
    for (const auto& [m, v] : per_model) pm[m] = mean_correctness(v);
    rec["mean_correctness_per_model"] = pm;

    Json pass = Json::object();
    for (const auto& [key, id] : selected.items()) {
      pass[key] = by_id.at(id.get<std::string>()) == 1.0;
    }
    Json labels = Json::object();
    for (const auto& [method, v] : scores.items()) labels[method] = pass.at(label_key(method));
    rec["labels"] = labels;
  }
  return Json::parse(canonical_json(rec));
}

ScoreRun score_corpus(const std::vector<ProblemBundle>& bundles,
                      const std::vector<SampleSet>& sets,
                      const std::map<std::string, LanguageProfile>& profiles, Harness& harness,
                      const ScoreOptions& opts) {
  if (opts.mode == EntropyMode::Graybox) require_likelihoods(sets);
  std::map<std::string, const SampleSet*> by_problem;
  for (const auto& s : sets) by_problem[s.problem_id] = &s;

  ScoreRun run;
  for (const auto& b : bundles) {
    auto it = by_problem.find(b.problem_id);
    if (it == by_problem.end()) continue;  // no samples for this problem
    try {
      run.records.push_back(score_problem(b, *it->second, profile_of(profiles, b), harness, opts));
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::Domain) throw;
      run.failures.emplace_back(b.problem_id, e.what());
    }
  }

  // Corpus-level correlation of each score with mean correctness.
  std::map<std::string, std::pair<std::vector<double>, std::vector<double>>> series;
  for (const auto& r : run.records) {
    if (!r.contains("mean_correctness")) continue;
    for (const auto& [method, v] : r["scores"].items()) {
      const std::string m = method_model(method);
      const double c = m.empty() ? r["mean_correctness"].get<double>()
                                 : r["mean_correctness_per_model"].value(m, 0.0);
      series[method].first.push_back(v.get<double>());
      series[method].second.push_back(c);
    }
  }
  Json corr = Json::object();
  for (const auto& [method, xy] : series) {
    try {
      corr[method] = pearson(xy.first, xy.second);
    } catch (const Error& e) {
      corr[method] = {{"n", xy.first.size()}, {"undefined", e.what()}};
    }
  }
  Json failed = Json::array();
  for (const auto& [pid, err] : run.failures) failed.push_back({{"problem_id", pid}, {"error", err}});
  run.summary = Json{{"mode", to_string(opts.mode)},
                     {"problems", bundles.size()},
                     {"scored", run.records.size()},
                     {"failed", failed},
                     {"correlation_with_mean_correctness", corr}};
  return run;
}

// ---- calibrate ------------------------------------------------------------

Json calibrate(const std::vector<Json>& records, const std::vector<double>& constraints) {
  if (constraints.empty()) fail_usage("calibrate: no FPR constraints");
  std::map<std::string, std::pair<std::vector<double>, std::vector<bool>>> data;
  for (const auto& r : records) {
    if (!r.contains("labels")) continue;
    for (const auto& [method, v] : r.at("scores").items()) {
      if (!r["labels"].contains(method)) continue;
      data[method].first.push_back(v.get<double>());
      data[method].second.push_back(r["labels"][method].get<bool>());
    }
  }
  if (data.empty()) {
    fail_domain("calibrate: no labelled records (scoring needs hidden tests to derive labels)");
  }
  Json methods = Json::object();
  Json skipped = Json::object();
  for (const auto& [method, d] : data) {
    RocCurve curve;
    try {
      curve = roc_sweep(d.first, d.second);
    } catch (const Error& e) {
      skipped[method] = e.what();
      continue;
    }
    Json points = Json::array();
    for (double c : constraints) {
      const OperatingPoint op = tpr_at_fpr(curve, c);
      Json p{{"constraint", c},
             {"tpr", op.tpr},
             {"fpr", op.fpr},
             {"accuracy", accuracy_at(d.first, d.second, op.threshold)}};
      p["threshold"] = std::isfinite(op.threshold) ? Json(op.threshold) : Json("-inf");
      points.push_back(std::move(p));
    }
    methods[method] = {{"n", d.first.size()},
                       {"positives", curve.positives},
                       {"negatives", curve.negatives},
                       {"operating_points", points}};
  }
  if (methods.empty()) {
    fail_domain("calibrate: labels are degenerate for every method (need at least one pass "
                "and one fail)");
  }
  Json out{{"constraints", constraints}, {"methods", methods}};
  if (!skipped.empty()) out["skipped"] = skipped;
  return out;
}

// ---- select ---------------------------------------------------------------

Selection select_from_record(const Json& record, const std::string& method, double tau,
                             SelectionRule rule, std::uint64_t seed) {
  Selection s;
  const Json& scores = record.at("scores");
  if (!scores.contains(method)) {
    std::string known;
    for (const auto& [m, v] : scores.items()) known += (known.empty() ? "" : ", ") + m;
    fail_usage("method '" + method + "' not scored for problem '" +
               record.value("problem_id", std::string()) + "' (available: " + known + ")");
  }
  s.u = scores[method].get<double>();
  if (!accept(s.u, tau)) {
    s.reason = "abstain: " + method + " = " + canonical_json(scores[method]) + " exceeds tau = " +
               (std::isfinite(tau) ? canonical_json(Json(tau)) : std::string("-inf"));
    return s;
  }
  SemanticPartition part = record.at("clusters").get<SemanticPartition>();
  std::map<std::string, std::string> model_of;
  std::map<std::string, std::size_t> lengths;
  for (const auto& [id, info] : record.at("samples").items()) {
    model_of[id] = info.at("model_id").get<std::string>();
  }
  for (const auto& [id, src] : record.at("sources").items()) {
    lengths[id] = src.get<std::string>().size();
  }
  const std::string model = method_model(method);
  if (!model.empty()) part = restrict_to_model(part, model_of, model);
  if (part.empty()) fail_domain("select: no clustered samples for method '" + method + "'");
  const std::uint64_t pseed = derive_seed(seed, record.at("problem_id").get<std::string>());
  s.sample_id = select_member(part.clusters.front(), lengths, rule, pseed);
  s.source = record["sources"][s.sample_id].get<std::string>();
  s.accepted = true;
  return s;
}

// ---- cluster analysis -----------------------------------------------------

Json analyze_clusters(const std::vector<ProblemBundle>& bundles,
                      const std::vector<SampleSet>& sets,
                      const std::map<std::string, LanguageProfile>& profiles, Harness& harness,
                      const ClusterAnalysisOptions& opts) {
  std::map<std::string, const ProblemBundle*> by_id;
  for (const auto& b : bundles) by_id[b.problem_id] = &b;
  const unsigned jobs = std::max(1u, opts.jobs);

  std::map<std::string, std::vector<SemanticPartition>> model_parts;
  std::map<std::string, std::vector<std::map<std::string, bool>>> model_correct;
  std::vector<SemanticPartition> ens_parts;
  std::vector<std::map<std::string, bool>> ens_correct;

  for (const auto& set : sets) {
    auto bit = by_id.find(set.problem_id);
    if (bit == by_id.end()) {
      throw ValidationError("known_problem_id",
                            "samples reference unknown problem '" + set.problem_id + "'");
    }
    const ProblemBundle& b = *bit->second;
    if (b.hidden_tests.empty()) {
      fail_domain("analyze-clusters: problem '" + b.problem_id + "' has no hidden tests");
    }
    const LanguageProfile& profile = profile_of(profiles, b);
    std::vector<CandidateProgram> all = set.samples;
    check_syntax_all(all, profile, harness, jobs);
    std::vector<CandidateProgram> valid;
    for (const auto& c : all) {
      if (c.syntactically_valid != Validity::Invalid) valid.push_back(c);
    }
    std::vector<BehaviorFingerprint> fps(valid.size());
    std::map<std::string, bool> correct;
    parallel_for(valid.size(), jobs, [&](std::size_t i) {
      fps[i] = harness.execute_on_tests(valid[i], b.hidden_tests, profile);
    });
    for (std::size_t i = 0; i < valid.size(); ++i) {
      const PassResult pr = score_outcomes(fps[i].outcomes, b.hidden_tests, 0);
      correct[valid[i].sample_id] = pr.all_passed();
    }
    for (const auto& c : all) {
      if (c.syntactically_valid == Validity::Invalid) correct[c.sample_id] = false;
    }
    const auto model_of = set.model_of();
    const SemanticPartition part = partition(fps, model_of);

    for (const auto& [m, ids] : set.grouping) {
      model_parts[m].push_back(restrict_to_model(part, model_of, m));
      std::map<std::string, bool> mc;
      for (const auto& id : ids) mc[id] = correct.at(id);
      model_correct[m].push_back(std::move(mc));
    }

    // Even split: the first n/L samples of every model, n the smallest group.
    std::size_t n = SIZE_MAX;
    for (const auto& [m, ids] : set.grouping) n = std::min(n, ids.size());
    const std::size_t share = set.grouping.empty() ? 0 : std::max<std::size_t>(1, n / set.grouping.size());
    std::set<std::string> chosen;
    std::map<std::string, bool> ec;
    for (const auto& [m, ids] : set.grouping) {
      for (std::size_t i = 0; i < share && i < ids.size(); ++i) {
        chosen.insert(ids[i]);
        ec[ids[i]] = correct.at(ids[i]);
      }
    }
    std::vector<BehaviorFingerprint> efps;
    for (const auto& fp : fps) {
      if (chosen.count(fp.sample_id)) efps.push_back(fp);
    }
    ens_parts.push_back(efps.empty() ? SemanticPartition{} : partition(efps, model_of));
    ens_correct.push_back(std::move(ec));
  }

  Json per_model = Json::object();
  for (const auto& [m, parts] : model_parts) {
    per_model[m] = largest_cluster_stats(
        parts, opts.k, IncorrectFilter{opts.min_incorrect, &model_correct[m]});
  }
  return Json{{"k", opts.k},
              {"min_incorrect", opts.min_incorrect},
              {"clustered_on", "hidden_tests"},
              {"per_model", per_model},
              {"ensemble", largest_cluster_stats(ens_parts, opts.k,
                                                 IncorrectFilter{opts.min_incorrect, &ens_correct})}};
}

// ---- cascade --------------------------------------------------------------

CascadeRun run_cascade_corpus(const std::vector<ProblemBundle>& bundles,
                              const CascadeConfig& config,
                              const std::map<std::string, LanguageProfile>& profiles,
                              Harness& harness, const CascadeRunOptions& opts) {
  std::map<std::string, Json> done;
  if (opts.resume && !opts.results_path.empty() &&
      std::ifstream(opts.results_path).good()) {
    // A run killed mid-write can leave a partial last line; drop it.
    std::string text = read_file(opts.results_path);
    const std::size_t last_nl = text.rfind('\n');
    const std::string tail = last_nl == std::string::npos ? text : text.substr(last_nl + 1);
    if (!tail.empty() && !Json::accept(tail)) {
      text.resize(last_nl == std::string::npos ? 0 : last_nl + 1);
      write_file(opts.results_path, text);
    }
    for (auto& r : parse_jsonl(text, opts.results_path)) {
      std::string pid = r.at("problem_id").get<std::string>();
      done[pid] = std::move(r);
    }
  } else if (!opts.results_path.empty()) {
    write_file(opts.results_path, "");
  }

  CascadeRunner runner(config, harness, profiles, opts.jobs);
  CascadeRun run;
  for (const auto& b : bundles) {
    if (auto it = done.find(b.problem_id); it != done.end()) {
      run.records.push_back(it->second);
      ++run.skipped;
      continue;
    }
    Json rec = result_record(runner.run(b), config);
    if (!opts.results_path.empty()) {
      std::ofstream out(opts.results_path, std::ios::app | std::ios::binary);
      out << canonical_json(rec) << '\n';
      if (!out) fail_environment("cannot append to '" + opts.results_path + "'");
    }
    run.records.push_back(std::move(rec));
  }
  run.summary = summarize(run.records);
  return run;
}

// ---- manifest -------------------------------------------------------------

RunManifest build_manifest(const std::string& command, const Json& config,
                           const std::vector<std::string>& inputs, std::uint64_t seed) {
  Json digests = Json::object();
  for (const auto& p : inputs) {
    if (!p.empty()) digests[p] = sha256_hex(read_file(p));
  }
  RunManifest m = make_manifest(Json{{"command", command}, {"config", config}, {"inputs", digests}},
                                seed);
  return m;
}

void write_manifest(RunManifest m, const std::string& path) {
  m.finished_at = utc_timestamp();
  write_report(Json(m), path);
}

}  // namespace esekit

#include "esekit/cascade.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <set>
#include <sstream>

#include "esekit/error.hpp"
#include "esekit/util.hpp"

namespace esekit {

namespace {

std::string fmt12(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.12g", v == 0.0 ? 0.0 : v);
  return buf;
}

double parse_flops_entry(const std::string& model, const Json& v) {
  if (v.is_number()) return v.get<double>();
  if (v.is_object() && v.contains("active_params")) {
    return 2.0 * v["active_params"].get<double>();
  }
  throw ValidationError("cost_model", "cost entry for '" + model +
                                          "' must be a number or {\"active_params\": n}");
}

Json trace_json(const CandidateTrace& t) {
  Json j{{"origin_id", t.origin_id},
         {"final_id", t.final_id},
         {"model_id", t.model_id},
         {"refinements", t.refinements},
         {"passed_public", t.passed_public}};
  if (!t.cause.empty()) j["cause"] = t.cause;
  return j;
}

}  // namespace

std::size_t LayerConfig::total_samples() const {
  std::size_t n = 0;
  for (const auto& m : ensemble) n += m.samples;
  return n;
}

std::string_view to_string(LayerDecision d) {
  return d == LayerDecision::Accept ? "accept" : "escalate";
}

// ---- config ---------------------------------------------------------------

void validate(const CascadeConfig& c) {
  if (c.layers.empty()) throw ValidationError("cascade_layers", "config has no layers");
  auto need_cost = [&](const std::string& m) {
    if (!c.models.count(m)) {
      throw ValidationError("known_model", "model '" + m + "' has no source entry");
    }
    auto it = c.flops_per_token.find(m);
    if (it == c.flops_per_token.end()) {
      throw ValidationError("cost_model", "model '" + m + "' has no cost_model entry");
    }
    if (!std::isfinite(it->second) || it->second < 0.0) {
      throw ValidationError("cost_model", "flops_per_token for '" + m +
                                              "' must be finite and non-negative");
    }
  };
  for (std::size_t i = 0; i < c.layers.size(); ++i) {
    const LayerConfig& l = c.layers[i];
    const std::string where = "layer " + std::to_string(i + 1);
    if (l.layer_index != i + 1) {
      throw ValidationError("cascade_layers", where + " has index " +
                                                  std::to_string(l.layer_index));
    }
    if (l.total_samples() == 0) {
      throw ValidationError("layer_budget", where + " draws no samples");
    }
    std::set<std::string> seen;
    for (const auto& m : l.ensemble) {
      if (m.samples == 0) {
        throw ValidationError("layer_budget", where + ": model '" + m.model_id +
                                                  "' has samples = 0");
      }
      if (!seen.insert(m.model_id).second) {
        throw ValidationError("layer_budget", where + " lists model '" + m.model_id +
                                                  "' twice");
      }
      need_cost(m.model_id);
    }
    if (!(l.alpha >= 0.0 && l.alpha <= 1.0)) {
      throw ValidationError("alpha_range", where + ": alpha must lie in [0, 1]");
    }
    if (!std::isfinite(l.tau)) throw ValidationError("tau_finite", where + ": tau must be finite");
  }
  if (c.test_generation) {
    need_cost(c.test_generation->model_id);
    if (c.test_generation->count == 0) {
      throw ValidationError("test_generation", "test_generation.count must be positive");
    }
  }
}

CascadeConfig parse_cascade_config(const Json& j, const std::string& base_dir) {
  CascadeConfig c;
  c.raw = j;
  try {
    if (j.contains("schema_version") && j["schema_version"].get<int>() != kSchemaVersion) {
      throw ValidationError("schema_version",
                            "cascade config schema_version " +
                                std::to_string(j["schema_version"].get<int>()) +
                                " is not supported (expected " +
                                std::to_string(kSchemaVersion) + ")");
    }
    c.seed = j.value("seed", std::uint64_t{0});
    c.selection_rule = parse_selection_rule(j.value("selection_rule", std::string("longest")));
    const std::string unc = j.value("uncertainty", std::string("edse"));
    if (unc == "edse") {
      c.uncertainty = UncertaintySource::Edse;
    } else if (unc == "ese") {
      c.uncertainty = UncertaintySource::Ese;
    } else {
      fail_usage("unknown uncertainty '" + unc + "' (expected edse or ese)");
    }
    c.refine_failure_cap = j.value("refine_failure_cap", std::size_t{3});
    for (const auto& [id, src] : j.at("models").items()) {
      c.models.emplace(id, parse_model_source(id, src, base_dir));
    }
    const Json cost = j.value("cost_model", Json::object());
    for (const auto& [id, v] : cost.items()) {
      c.flops_per_token[id] = parse_flops_entry(id, v);
    }
    if (j.contains("test_generation")) {
      const Json& t = j["test_generation"];
      TestGenerationConfig tg;
      tg.model_id = t.at("model").get<std::string>();
      tg.count = t.value("count", tg.count);
      tg.min_ok = t.value("min_ok", tg.min_ok);
      c.test_generation = tg;
    }
    const Json& layers = j.at("layers");
    for (std::size_t i = 0; i < layers.size(); ++i) {
      const Json& lj = layers[i];
      LayerConfig l;
      l.layer_index = i + 1;
      for (const auto& m : lj.at("ensemble")) {
        l.ensemble.push_back({m.at("model").get<std::string>(),
                              m.at("samples").get<std::size_t>()});
      }
      l.debug_steps = lj.value("debug_steps", std::size_t{0});
      l.alpha = lj.value("alpha", 0.5);
      const bool is_final = i + 1 == layers.size();
      if (!lj.contains("tau") && !is_final) {
        throw ValidationError("tau_finite", "layer " + std::to_string(i + 1) +
                                                " needs a tau (only the final layer may omit it)");
      }
      l.tau = lj.value("tau", 0.0);
      c.layers.push_back(std::move(l));
    }
  } catch (const Json::exception& e) {
    fail_domain(std::string("cascade config: ") + e.what());
  }
  validate(c);
  return c;
}

CascadeConfig load_cascade_config(const std::string& path) {
  Json j;
  try {
    j = Json::parse(read_file(path));
  } catch (const Json::parse_error& e) {
    fail_domain("cascade config '" + path + "': " + e.what());
  }
  return parse_cascade_config(j, std::filesystem::path(path).parent_path().string());
}

// ---- cost -----------------------------------------------------------------

double record_cost(const GenerationUsage& usage,
                   const std::map<std::string, double>& flops_per_token) {
  auto it = flops_per_token.find(usage.model_id);
  if (it == flops_per_token.end()) {
    fail_domain("record_cost: model '" + usage.model_id + "' is not in the cost model");
  }
  return static_cast<double>(usage.completion_tokens) * it->second;
}

void CostLedger::add(std::size_t layer, const GenerationUsage& usage) {
  for (TokenTotals* t : {&per_model_[usage.model_id], &per_layer_[layer][usage.model_id]}) {
    t->prompt_tokens += usage.prompt_tokens;
    t->completion_tokens += usage.completion_tokens;
    t->calls += usage.calls;
  }
}

std::map<std::string, TokenTotals> CostLedger::layer_tokens(std::size_t layer) const {
  auto it = per_layer_.find(layer);
  return it == per_layer_.end() ? std::map<std::string, TokenTotals>{} : it->second;
}

std::int64_t CostLedger::generation_calls() const {
  std::int64_t n = 0;
  for (const auto& [layer, models] : per_layer_) {
    if (layer == 0) continue;
    for (const auto& [m, t] : models) n += t.calls;
  }
  return n;
}

std::size_t CostLedger::highest_layer() const {
  return per_layer_.empty() ? 0 : per_layer_.rbegin()->first;
}

double CostLedger::layer_flops(std::size_t layer,
                               const std::map<std::string, double>& fpt) const {
  double f = 0.0;
  for (const auto& [m, t] : layer_tokens(layer)) {
    GenerationUsage u;
    u.model_id = m;
    u.completion_tokens = t.completion_tokens;
    f += record_cost(u, fpt);
  }
  return f;
}

double CostLedger::total_flops(const std::map<std::string, double>& fpt) const {
  double f = 0.0;
  for (const auto& [layer, models] : per_layer_) f += layer_flops(layer, fpt);
  return f;
}

Json CostLedger::to_json(const std::map<std::string, double>& fpt) const {
  auto totals_json = [](const std::map<std::string, TokenTotals>& m) {
    Json j = Json::object();
    for (const auto& [id, t] : m) {
      j[id] = {{"prompt_tokens", t.prompt_tokens},
               {"completion_tokens", t.completion_tokens},
               {"calls", t.calls}};
    }
    return j;
  };
  Json layers = Json::array();
  for (const auto& [layer, models] : per_layer_) {
    layers.push_back({{"layer", layer},
                      {"flops", layer_flops(layer, fpt)},
                      {"tokens", totals_json(models)}});
  }
  const double total = total_flops(fpt);
  return Json{{"per_model", totals_json(per_model_)},
              {"layers", layers},
              {"generation_calls", generation_calls()},
              {"total_flops", total},
              {"total_tflops", total / 1e12}};
}

// ---- layers ---------------------------------------------------------------

double cascade_score(double lambda, double u_hat, double alpha) {
  return alpha * lambda - (1.0 - alpha) * u_hat;
}

DebugResult debug_and_filter(std::vector<CandidateProgram> candidates, std::size_t D,
                             const DebugContext& ctx) {
  if (candidates.empty()) fail_domain("debug_and_filter: no candidates");
  const ProblemBundle& problem = *ctx.problem;
  const LanguageProfile& profile = *ctx.profile;
  const GenerationRequest req{problem.problem_id, problem.prompt, ""};

  struct Slot {
    CandidateProgram program;
    CandidateTrace trace;
    std::vector<GenerationUsage> usage;
  };
  std::vector<Slot> slots(candidates.size());

  parallel_for(candidates.size(), std::max(1u, ctx.jobs), [&](std::size_t i) {
    Slot& slot = slots[i];
    CandidateProgram cur = std::move(candidates[i]);
    slot.trace.origin_id = cur.sample_id;
    slot.trace.model_id = cur.model_id;
    try {
      for (std::size_t step = 0;; ++step) {
        std::string diagnostics;
        if (cur.syntactically_valid == Validity::Unknown &&
            !profile.syntax_check_command.empty()) {
          diagnostics = ctx.harness->check_syntax_in_place(cur, profile).diagnostic;
        }
        PassResult pr;
        if (cur.syntactically_valid == Validity::Invalid) {
          pr.failed = problem.public_tests.size();
          if (diagnostics.empty()) diagnostics = "no program could be extracted";
        } else {
          pr = ctx.harness->evaluate_public(cur, problem.public_tests, profile);
        }
        if (cur.syntactically_valid != Validity::Invalid && pr.all_passed()) {
          slot.trace.passed_public = true;
          break;
        }
        if (step == D) break;
        auto client = ctx.source_of.find(cur.model_id);
        if (client == ctx.source_of.end()) {
          fail_domain("no source for model '" + cur.model_id + "'");
        }
        Refinement ref = client->second->refine(req, cur, pr, diagnostics, ctx.failure_cap);
        slot.usage.push_back(ref.usage);
        cur = std::move(ref.program);
        slot.trace.refinements = step + 1;
      }
    } catch (const Error& e) {
      if (e.kind() == ErrorKind::Environment) throw;
      slot.trace.passed_public = false;
      slot.trace.cause = e.what();
    }
    slot.trace.final_id = cur.sample_id;
    slot.program = std::move(cur);
  });

  DebugResult out;
  for (auto& s : slots) {
    if (s.trace.passed_public) out.passing.push_back(s.program);
    out.traces.push_back(std::move(s.trace));
    for (auto& u : s.usage) out.usage.push_back(std::move(u));
  }
  out.lambda = static_cast<double>(out.passing.size()) / static_cast<double>(slots.size());
  return out;
}

CascadeRunner::CascadeRunner(CascadeConfig config, Harness& harness,
                             std::map<std::string, LanguageProfile> profiles, unsigned jobs)
    : config_(std::move(config)),
      harness_(harness),
      profiles_(std::move(profiles)),
      jobs_(std::max(1u, jobs)) {
  validate(config_);
  for (const auto& [id, src] : config_.models) clients_.emplace(id, make_client(src));
}

void CascadeRunner::require_deterministic() const {
  for (const auto& [id, client] : clients_) {
    if (!client->deterministic()) {
      fail_usage("model '" + id +
                 "' is a live source; sweeps need replay or mock sources to be reproducible");
    }
  }
}

const LanguageProfile& CascadeRunner::profile_for(const ProblemBundle& p) const {
  auto it = profiles_.find(p.language_profile_id);
  if (it == profiles_.end()) {
    fail_domain("problem '" + p.problem_id + "' uses unknown language profile '" +
                p.language_profile_id + "'");
  }
  return it->second;
}

LayerOutcome CascadeRunner::run_layer(const ProblemBundle& problem,
                                      const std::vector<TestCase>& gen_tests,
                                      const LayerConfig& layer, bool is_final,
                                      std::uint64_t seed, CostLedger& ledger) {
  const LanguageProfile& profile = profile_for(problem);
  LayerOutcome lo;
  lo.layer_index = layer.layer_index;
  lo.candidates = layer.total_samples();

  // Stage 1: sampling, fanned out across the ensemble.
  std::vector<SampleBatch> batches(layer.ensemble.size());
  parallel_for(layer.ensemble.size(), jobs_, [&](std::size_t i) {
    const EnsembleMember& m = layer.ensemble[i];
    GenerationRequest req{problem.problem_id, problem.prompt,
                          "L" + std::to_string(layer.layer_index) + "-" + m.model_id};
    batches[i] = clients_.at(m.model_id)->sample(req, m.samples, derive_seed(seed, m.model_id));
  });
  std::vector<CandidateProgram> candidates;
  for (std::size_t i = 0; i < batches.size(); ++i) {
    ledger.add(layer.layer_index, batches[i].usage);
    if (batches[i].programs.size() != layer.ensemble[i].samples) {
      fail_domain("model '" + layer.ensemble[i].model_id + "' returned " +
                  std::to_string(batches[i].programs.size()) + " programs, expected " +
                  std::to_string(layer.ensemble[i].samples));
    }
    for (auto& p : batches[i].programs) candidates.push_back(std::move(p));
  }

  // Stage 2: public-test debugging.
  DebugContext ctx;
  ctx.problem = &problem;
  ctx.profile = &profile;
  ctx.harness = &harness_;
  for (const auto& [id, c] : clients_) ctx.source_of[id] = c.get();
  ctx.failure_cap = config_.refine_failure_cap;
  ctx.jobs = jobs_;
  DebugResult dr = debug_and_filter(std::move(candidates), layer.debug_steps, ctx);
  for (const auto& u : dr.usage) ledger.add(layer.layer_index, u);
  lo.lambda = dr.lambda;
  lo.passing = dr.passing.size();
  lo.traces = std::move(dr.traces);

  if (dr.passing.empty()) {
    lo.decision = is_final ? LayerDecision::Accept : LayerDecision::Escalate;
    lo.no_solution = is_final;
    return lo;
  }

  // Stage 3: clustering of the passing set and uncertainty.
  if (gen_tests.empty()) {
    fail_domain("problem '" + problem.problem_id + "' has no generated tests to cluster on");
  }
  std::vector<BehaviorFingerprint> fps(dr.passing.size());
  parallel_for(dr.passing.size(), jobs_, [&](std::size_t i) {
    fps[i] = harness_.execute_on_tests(dr.passing[i], gen_tests, profile);
  });
  const SampleSet passing = make_sample_set(problem.problem_id, dr.passing);
  lo.partition = partition(fps, passing.model_of());

  bool graybox = config_.uncertainty == UncertaintySource::Ese;
  for (const auto& p : passing.samples) {
    if (!p.sequence_log_likelihood || !p.token_count) graybox = false;
  }
  lo.report = uncertainty_report(passing, lo.partition,
                                 graybox ? EntropyMode::Graybox : EntropyMode::Blackbox);
  lo.uncertainty_used = graybox ? "ese" : "edse";
  lo.normalized_u = lo.report->normalized_u;
  lo.score = cascade_score(lo.lambda, lo.normalized_u, layer.alpha);

  // Stage 4: decision and selection.
  const bool accept_now = is_final || lo.score >= layer.tau;
  lo.decision = accept_now ? LayerDecision::Accept : LayerDecision::Escalate;
  if (accept_now) {
    lo.selected = select_program(lo.partition, passing, config_.selection_rule, seed);
  }
  return lo;
}

CascadeResult CascadeRunner::run(const ProblemBundle& problem) {
  CascadeResult r;
  r.problem_id = problem.problem_id;
  const std::uint64_t pseed = derive_seed(config_.seed, problem.problem_id);

  std::vector<TestCase> gen_tests = problem.generated_tests;
  if (gen_tests.empty() && config_.test_generation) {
    const auto& tg = *config_.test_generation;
    GenerationRequest req{problem.problem_id, problem.prompt, "T"};
    GeneratedTests gt = clients_.at(tg.model_id)->generate_tests(req, tg.count, tg.min_ok);
    r.ledger.add(0, gt.usage);
    gen_tests = std::move(gt.tests);
  }

  for (std::size_t i = 0; i < config_.layers.size(); ++i) {
    const LayerConfig& layer = config_.layers[i];
    const bool is_final = i + 1 == config_.layers.size();
    LayerOutcome lo = run_layer(problem, gen_tests, layer, is_final,
                                derive_seed(pseed, "layer" + std::to_string(layer.layer_index)),
                                r.ledger);
    const bool done = lo.decision == LayerDecision::Accept;
    if (done) {
      r.exit_layer = layer.layer_index;
      r.no_solution = lo.no_solution;
      r.selected = lo.selected;
    }
    r.layers.push_back(std::move(lo));
    if (done) break;
  }

  if (!problem.hidden_tests.empty()) {
    r.hidden_score = r.selected
                         ? harness_.correctness_score(*r.selected, problem.hidden_tests,
                                                      profile_for(problem))
                         : 0.0;
  }
  return r;
}

Json result_record(const CascadeResult& r, const CascadeConfig& config) {
  Json layers = Json::array();
  for (const auto& lo : r.layers) {
    Json lj{{"layer", lo.layer_index},
            {"candidates", lo.candidates},
            {"passing", lo.passing},
            {"lambda", lo.lambda},
            {"decision", to_string(lo.decision)},
            {"no_solution", lo.no_solution}};
    if (lo.report) {
      lj["uncertainty"] = lo.uncertainty_used;
      lj["edse"] = lo.report->edse;
      if (lo.report->ese) lj["ese"] = *lo.report->ese;
      lj["jsd"] = lo.report->jsd;
      lj["cluster_count"] = lo.report->cluster_count;
      lj["normalized_u"] = lo.normalized_u;
      lj["score"] = lo.score;
      lj["clusters"] = lo.partition;
    } else {
      lj["score"] = nullptr;
    }
    if (lo.selected) lj["selected_sample_id"] = lo.selected->sample_id;
    Json traces = Json::array();
    for (const auto& t : lo.traces) traces.push_back(trace_json(t));
    lj["traces"] = traces;
    layers.push_back(std::move(lj));
  }
  Json j{{"schema_version", kSchemaVersion},
         {"problem_id", r.problem_id},
         {"exit_layer", r.exit_layer},
         {"no_solution", r.no_solution},
         {"layers", layers},
         {"ledger", r.ledger.to_json(config.flops_per_token)}};
  if (r.selected) {
    j["selected"] = {{"sample_id", r.selected->sample_id},
                     {"model_id", r.selected->model_id},
                     {"refinement_step", r.selected->refinement_step},
                     {"source", r.selected->source}};
  } else {
    j["selected"] = nullptr;
  }
  if (r.hidden_score) {
    j["hidden_score"] = *r.hidden_score;
    j["passed"] = !r.no_solution && *r.hidden_score == 1.0;
  }
  return Json::parse(canonical_json(j));
}

CascadeSummary summarize(const std::vector<Json>& records) {
  CascadeSummary s;
  s.problems = records.size();
  std::size_t l1_solved = 0, l1_passed = 0, l1 = 0;
  for (const auto& r : records) {
    const std::size_t exit = r.at("exit_layer").get<std::size_t>();
    const bool flagged = r.at("no_solution").get<bool>();
    const bool passed = r.value("passed", false);
    ++s.exit_layers[exit];
    if (passed) ++s.passed;
    if (flagged) ++s.no_solution;
    s.cost_tflops += r.at("ledger").at("total_tflops").get<double>();
    if (exit == 1) {
      ++l1;
      if (!flagged && r.contains("passed")) {
        ++l1_solved;
        if (passed) ++l1_passed;
      }
    }
  }
  if (s.problems > 0) {
    const double n = static_cast<double>(s.problems);
    s.pass_rate = static_cast<double>(s.passed) / n;
    s.exit_at_l1 = static_cast<double>(l1) / n;
  }
  if (l1_solved > 0) {
    s.pass_at_exit = static_cast<double>(l1_passed) / static_cast<double>(l1_solved);
  }
  return s;
}

void to_json(Json& j, const CascadeSummary& s) {
  Json hist = Json::object();
  for (const auto& [layer, n] : s.exit_layers) hist[std::to_string(layer)] = n;
  j = Json{{"problems", s.problems},
           {"passed", s.passed},
           {"pass_rate", s.pass_rate},
           {"cost_tflops", s.cost_tflops},
           {"exit_at_l1", s.exit_at_l1},
           {"no_solution", s.no_solution},
           {"exit_layers", hist}};
  j["pass_at_exit"] = s.pass_at_exit ? Json(*s.pass_at_exit) : Json(nullptr);
}

// ---- sweeps ---------------------------------------------------------------

std::vector<SweepRow> sweep_thresholds(const std::vector<ProblemBundle>& corpus,
                                       const CascadeConfig& config, const SweepGrid& grid,
                                       const std::map<std::string, LanguageProfile>& profiles,
                                       const HarnessOptions& harness_options) {
  if (grid.tau1.empty() || grid.alpha1.empty()) fail_usage("sweep: empty grid");
  HarnessOptions ho = harness_options;
  ho.memoize = true;
  Harness harness(ho);
  std::vector<SweepRow> rows;
  for (double alpha : grid.alpha1) {
    for (double tau : grid.tau1) {
      CascadeConfig cfg = config;
      cfg.layers.front().tau = tau;
      cfg.layers.front().alpha = alpha;
      CascadeRunner runner(cfg, harness, profiles, ho.jobs);
      runner.require_deterministic();
      SweepRow row;
      row.tau1 = tau;
      row.alpha1 = alpha;
      for (const auto& p : corpus) row.records.push_back(result_record(runner.run(p), cfg));
      row.summary = summarize(row.records);
      rows.push_back(std::move(row));
    }
  }
  return rows;
}

std::string sweep_csv(const std::vector<SweepRow>& rows) {
  std::string out = "tau1,alpha1,pass_rate,cost_tflops,exit_at_l1,pass_at_exit,no_solution\n";
  for (const auto& r : rows) {
    out += fmt12(r.tau1) + "," + fmt12(r.alpha1) + "," + fmt12(r.summary.pass_rate) + "," +
           fmt12(r.summary.cost_tflops) + "," + fmt12(r.summary.exit_at_l1) + "," +
           (r.summary.pass_at_exit ? fmt12(*r.summary.pass_at_exit) : std::string()) + "," +
           std::to_string(r.summary.no_solution) + "\n";
  }
  return out;
}

SweepGrid parse_sweep_spec(const std::string& spec, const CascadeConfig& config) {
  SweepGrid g;
  std::string normalized = spec;
  std::replace(normalized.begin(), normalized.end(), ';', ' ');
  std::istringstream in(normalized);
  std::string item;
  while (in >> item) {
    const auto eq = item.find('=');
    if (eq == std::string::npos) fail_usage("--sweep: expected key=v1,v2,... got '" + item + "'");
    const std::string key = item.substr(0, eq);
    std::vector<double>* axis = nullptr;
    if (key == "tau" || key == "tau1") {
      axis = &g.tau1;
    } else if (key == "alpha" || key == "alpha1") {
      axis = &g.alpha1;
    } else {
      fail_usage("--sweep: unknown axis '" + key + "' (expected tau or alpha)");
    }
    std::istringstream vals(item.substr(eq + 1));
    std::string v;
    while (std::getline(vals, v, ',')) {
      std::size_t used = 0;
      double x = 0.0;
      try {
        x = std::stod(v, &used);
      } catch (const std::exception&) {
        used = 0;
      }
      if (v.empty() || used != v.size() || !std::isfinite(x)) {
        fail_usage("--sweep: bad number '" + v + "' for " + key);
      }
      if (axis == &g.alpha1 && !(x >= 0.0 && x <= 1.0)) {
        fail_usage("--sweep: alpha values must lie in [0, 1]");
      }
      axis->push_back(x);
    }
  }
  if (g.tau1.empty()) g.tau1.push_back(config.layers.front().tau);
  if (g.alpha1.empty()) g.alpha1.push_back(config.layers.front().alpha);
  return g;
}

}  // namespace esekit

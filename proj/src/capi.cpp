#include "esekit/esekit.h"

#include <cstdio>
#include <cstring>
#include <filesystem>
#include <new>

#include "esekit/cascade.hpp"
#include "esekit/error.hpp"
#include "esekit/util.hpp"
#include "esekit/workflows.hpp"

using namespace esekit;

struct esekit_context {
  unsigned jobs = 1;
  std::optional<std::uint64_t> seed;
  std::map<std::string, LanguageProfile> profiles = builtin_profiles();
  std::string profiles_path;
  std::string last_error;
};

namespace {

template <class F>
esekit_status guarded(esekit_context* ctx, F&& fn) {
  if (!ctx) return ESEKIT_USAGE;
  ctx->last_error.clear();
  try {
    fn();
    return ESEKIT_OK;
  } catch (const Error& e) {
    ctx->last_error = e.what();
    return static_cast<esekit_status>(e.kind());
  } catch (const Json::exception& e) {
    ctx->last_error = std::string("malformed JSON input: ") + e.what();
    return ESEKIT_DOMAIN;
  } catch (const std::bad_alloc&) {
    ctx->last_error = "out of memory";
    return ESEKIT_ENVIRONMENT;
  } catch (const std::exception& e) {
    ctx->last_error = std::string("internal error: ") + e.what();
    return ESEKIT_INTERNAL;
  }
}

char* dup_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (!out) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

Json parse_request(const char* text) {
  if (!text) fail_usage("missing request");
  try {
    return Json::parse(text);
  } catch (const Json::parse_error& e) {
    fail_usage(std::string("request is not valid JSON: ") + e.what());
  }
}

std::string need(const Json& req, const char* key) {
  if (!req.contains(key) || !req[key].is_string() || req[key].get<std::string>().empty()) {
    fail_usage(std::string("missing required option '") + key + "'");
  }
  return req[key].get<std::string>();
}

void need_out(char** out) {
  if (!out) fail_usage("result pointer is null");
  *out = nullptr;
}

HarnessOptions harness_options(const esekit_context* ctx) {
  HarnessOptions o;
  o.jobs = ctx->jobs;
  return o;
}

double number_or_inf(const Json& v, const char* what) {
  if (v.is_number()) return v.get<double>();
  if (v.is_string()) {
    const std::string s = v.get<std::string>();
    if (s == "-inf") return kAcceptNothing;
    std::size_t used = 0;
    try {
      const double d = std::stod(s, &used);
      if (used == s.size()) return d;
    } catch (const std::exception&) {
    }
  }
  fail_usage(std::string("bad number for ") + what);
}

std::string fmt_axis(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

}  // namespace

extern "C" {

const char* esekit_version(void) { return kToolVersion.data(); }

esekit_status esekit_context_new(esekit_context** out) {
  if (!out) return ESEKIT_USAGE;
  try {
    *out = new esekit_context();
    return ESEKIT_OK;
  } catch (...) {
    *out = nullptr;
    return ESEKIT_ENVIRONMENT;
  }
}

void esekit_context_free(esekit_context* ctx) { delete ctx; }

const char* esekit_last_error(const esekit_context* ctx) {
  return ctx ? ctx->last_error.c_str() : "null context";
}

void esekit_string_free(char* s) { std::free(s); }

esekit_status esekit_set_jobs(esekit_context* ctx, unsigned jobs) {
  return guarded(ctx, [&] {
    if (jobs == 0) fail_usage("jobs must be at least 1");
    ctx->jobs = jobs;
  });
}

esekit_status esekit_set_seed(esekit_context* ctx, uint64_t seed) {
  return guarded(ctx, [&] { ctx->seed = seed; });
}

esekit_status esekit_load_profiles(esekit_context* ctx, const char* path) {
  return guarded(ctx, [&] {
    if (!path) fail_usage("profiles path is null");
    ctx->profiles = load_profiles(path);
    ctx->profiles_path = path;
  });
}

esekit_status esekit_entropy(esekit_context* ctx, const double* p, size_t n, double* out) {
  return guarded(ctx, [&] {
    if ((!p && n) || !out) fail_usage("esekit_entropy: null pointer");
    ClusterProbs probs;
    for (size_t i = 0; i < n; ++i) probs["c" + std::to_string(i)] = p[i];
    *out = shannon_entropy(probs);
  });
}

esekit_status esekit_ensemble_entropy(esekit_context* ctx, const double* probs, size_t models,
                                      size_t clusters, double* entropy, double* mean_within,
                                      double* jsd) {
  return guarded(ctx, [&] {
    if (!probs || !entropy || !mean_within || !jsd) fail_usage("esekit_ensemble_entropy: null pointer");
    std::vector<ModelSemanticDistribution> dists(models);
    for (size_t m = 0; m < models; ++m) {
      dists[m].model_id = "m" + std::to_string(m);
      for (size_t c = 0; c < clusters; ++c) {
        const double v = probs[m * clusters + c];
        if (v > 0.0) dists[m].probs["c" + std::to_string(c)] = v;
      }
    }
    *entropy = shannon_entropy(aggregate(dists).probs);
    const Decomposition d = decompose(dists);
    *mean_within = d.mean_within;
    *jsd = d.jsd;
  });
}

esekit_status esekit_normalized_uncertainty(esekit_context* ctx, double h, size_t clusters,
                                            double* out) {
  return guarded(ctx, [&] {
    if (!out) fail_usage("null pointer");
    *out = normalized_uncertainty(h, clusters);
  });
}

esekit_status esekit_cascade_score(esekit_context* ctx, double lambda, double u_hat,
                                   double alpha, double* out) {
  return guarded(ctx, [&] {
    if (!out) fail_usage("null pointer");
    *out = cascade_score(lambda, u_hat, alpha);
  });
}

esekit_status esekit_pearson(esekit_context* ctx, const double* x, const double* y, size_t n,
                             double* r, double* p_value) {
  return guarded(ctx, [&] {
    if (!x || !y || !r || !p_value) fail_usage("esekit_pearson: null pointer");
    const CorrelationResult c =
        pearson(std::vector<double>(x, x + n), std::vector<double>(y, y + n));
    *r = c.r;
    *p_value = c.p_value;
  });
}

esekit_status esekit_score(esekit_context* ctx, const char* request_json, char** result_json) {
  return guarded(ctx, [&] {
    need_out(result_json);
    const Json req = parse_request(request_json);
    const std::string bundles_path = need(req, "bundles");
    const std::string samples_path = need(req, "samples");
    const std::string out = need(req, "out");
    ScoreOptions opts;
    opts.mode = parse_entropy_mode(req.value("mode", std::string("blackbox")));
    opts.rule = parse_selection_rule(req.value("rule", std::string("longest")));
    opts.seed = ctx->seed.value_or(0);
    opts.jobs = ctx->jobs;
    opts.invalid_as_cluster = req.value("invalid_cluster", false);

    const auto bundles = load_bundles(bundles_path, BundleLoadOptions{true});
    SampleLoadOptions so;
    so.corpus = &bundles;
    const auto sets = load_samples(samples_path, so);
    Harness harness(harness_options(ctx));
    const ScoreRun run = score_corpus(bundles, sets, ctx->profiles, harness, opts);

    RunManifest m = build_manifest(
        "score",
        Json{{"mode", to_string(opts.mode)},
             {"rule", to_string(opts.rule)},
             {"invalid_cluster", opts.invalid_as_cluster}},
        {bundles_path, samples_path, ctx->profiles_path}, opts.seed);
    write_file(out, to_jsonl(run.records));
    write_manifest(m, out + ".manifest.json");
    *result_json = dup_string(canonical_json(run.summary));
  });
}

esekit_status esekit_calibrate(esekit_context* ctx, const char* request_json,
                               char** result_json) {
  return guarded(ctx, [&] {
    need_out(result_json);
    const Json req = parse_request(request_json);
    std::vector<double> fprs = req.value("fpr", std::vector<double>{0.05, 0.10});
    const Json report = calibrate(read_jsonl(need(req, "scored")), fprs);
    *result_json = dup_string(canonical_json(report));
  });
}

esekit_status esekit_select(esekit_context* ctx, const char* request_json, char** result_json) {
  return guarded(ctx, [&] {
    need_out(result_json);
    const Json req = parse_request(request_json);
    const auto records = read_jsonl(need(req, "scored"));
    if (!req.contains("tau")) fail_usage("missing required option 'tau'");
    const double tau = number_or_inf(req["tau"], "tau");
    const std::string problem = req.value("problem", std::string());
    const Json* record = nullptr;
    if (problem.empty()) {
      if (records.size() != 1) {
        fail_usage("scored file holds " + std::to_string(records.size()) +
                   " problems; pick one with --problem");
      }
      record = &records.front();
    } else {
      for (const auto& r : records) {
        if (r.value("problem_id", std::string()) == problem) record = &r;
      }
      if (!record) fail_domain("no scored report for problem '" + problem + "'");
    }
    const Selection s = select_from_record(
        *record, req.value("method", std::string("normalized_u")), tau,
        parse_selection_rule(req.value("rule", std::string("longest"))), ctx->seed.value_or(0));
    Json out{{"problem_id", record->at("problem_id")}, {"accepted", s.accepted}, {"u", s.u}};
    if (s.accepted) {
      out["sample_id"] = s.sample_id;
      out["source"] = s.source;
    } else {
      out["reason"] = s.reason;
    }
    *result_json = dup_string(canonical_json(out));
  });
}

esekit_status esekit_cascade(esekit_context* ctx, const char* request_json, char** result_json) {
  return guarded(ctx, [&] {
    need_out(result_json);
    const Json req = parse_request(request_json);
    const std::string bundles_path = need(req, "bundles");
    const std::string config_path = need(req, "config");
    const std::string out = need(req, "out");
    CascadeConfig config = load_cascade_config(config_path);
    if (ctx->seed) config.seed = *ctx->seed;
    const auto bundles = load_bundles(bundles_path);

    RunManifest m = build_manifest("cascade", config.raw,
                                   {bundles_path, config_path, ctx->profiles_path}, config.seed);
    Harness harness(harness_options(ctx));
    CascadeRunOptions opts;
    opts.results_path = out;
    opts.resume = req.value("resume", false);
    opts.jobs = ctx->jobs;
    const CascadeRun run = run_cascade_corpus(bundles, config, ctx->profiles, harness, opts);
    Json summary = run.summary;
    summary["resumed"] = run.skipped;
    write_report(summary, out + ".summary.json");
    write_manifest(m, out + ".manifest.json");
    *result_json = dup_string(canonical_json(summary));
  });
}

esekit_status esekit_sweep(esekit_context* ctx, const char* request_json, char** result_csv) {
  return guarded(ctx, [&] {
    need_out(result_csv);
    const Json req = parse_request(request_json);
    CascadeConfig config = load_cascade_config(need(req, "config"));
    if (ctx->seed) config.seed = *ctx->seed;
    const auto bundles = load_bundles(need(req, "bundles"));
    const SweepGrid grid = parse_sweep_spec(need(req, "sweep"), config);
    const auto rows = sweep_thresholds(bundles, config, grid, ctx->profiles, harness_options(ctx));
    const std::string prefix = req.value("log_prefix", std::string());
    if (!prefix.empty()) {
      for (const auto& r : rows) {
        write_file(prefix + ".tau" + fmt_axis(r.tau1) + "_alpha" + fmt_axis(r.alpha1) + ".jsonl",
                   to_jsonl(r.records));
      }
    }
    *result_csv = dup_string(sweep_csv(rows));
  });
}

esekit_status esekit_analyze_clusters(esekit_context* ctx, const char* request_json,
                                      char** result_json) {
  return guarded(ctx, [&] {
    need_out(result_json);
    const Json req = parse_request(request_json);
    const auto bundles = load_bundles(need(req, "bundles"));
    SampleLoadOptions so;
    so.corpus = &bundles;
    const auto sets = load_samples(need(req, "samples"), so);
    ClusterAnalysisOptions opts;
    opts.k = req.value("k", opts.k);
    opts.min_incorrect = req.value("min_incorrect", opts.min_incorrect);
    opts.jobs = ctx->jobs;
    Harness harness(harness_options(ctx));
    *result_json =
        dup_string(canonical_json(analyze_clusters(bundles, sets, ctx->profiles, harness, opts)));
  });
}

}  // extern "C"

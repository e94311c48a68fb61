// esekit command-line front end. Links only the C interface.
#include <cstdio>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "esekit/esekit.h"
#include "json.hpp"

using Json = nlohmann::json;

namespace {

struct Context {
  esekit_context* ctx = nullptr;
  ~Context() { esekit_context_free(ctx); }
};

int exit_code(esekit_status s) {
  switch (s) {
    case ESEKIT_OK: return 0;
    case ESEKIT_USAGE: return 2;
    case ESEKIT_ENVIRONMENT: return 3;
    default: return 1;
  }
}

int report_failure(esekit_context* ctx, esekit_status s) {
  std::cerr << "esekit: " << esekit_last_error(ctx) << "\n";
  return exit_code(s);
}

// Runs a workflow call and hands its owned result string to `on_ok`.
template <class Fn, class OnOk>
int call(esekit_context* ctx, Fn fn, const Json& req, OnOk on_ok) {
  char* result = nullptr;
  const std::string text = req.dump();
  const esekit_status s = fn(ctx, text.c_str(), &result);
  if (s != ESEKIT_OK) return report_failure(ctx, s);
  std::string payload(result);
  esekit_string_free(result);
  return on_ok(payload);
}

bool write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << text;
  return static_cast<bool>(out);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Ensemble semantic entropy for sampled programs"};
  app.set_version_flag("--version", std::string(esekit_version()));
  app.require_subcommand(1);

  unsigned jobs = 1;
  std::uint64_t seed = 0;
  std::string profiles;
  app.add_option("--jobs", jobs, "Concurrent sandboxes")->check(CLI::PositiveNumber);
  auto* seed_opt = app.add_option("--seed", seed, "RNG seed (overrides config seeds)");
  app.add_option("--profiles", profiles, "Language profiles JSON")->check(CLI::ExistingFile);

  std::string bundles, samples, config, out, scored, mode = "blackbox", rule = "longest",
                                                       method = "normalized_u", problem, sweep,
                                                       tau_text;
  std::vector<double> fpr{0.05, 0.10};
  std::size_t k = 5, min_incorrect = 3;
  bool resume = false;
  bool invalid_cluster = false;

  auto* score = app.add_subcommand("score", "Cluster samples and compute uncertainty reports");
  score->add_option("--bundles", bundles, "Problem bundles JSONL")->required();
  score->add_option("--samples", samples, "Candidate programs JSONL")->required();
  score->add_option("--out", out, "Scored records JSONL")->required();
  score->add_option("--mode", mode)->check(CLI::IsMember({"blackbox", "graybox"}));
  score->add_option("--rule", rule)->check(CLI::IsMember({"longest", "seeded_uniform"}));
  score->add_flag("--invalid-cluster", invalid_cluster,
                  "Cluster invalid samples together instead of dropping them");

  auto* calib = app.add_subcommand("calibrate", "TPR and thresholds at FPR constraints");
  calib->add_option("--scored,--in", scored, "Scored records JSONL")->required();
  calib->add_option("--fpr", fpr, "FPR constraints")->expected(1, -1);
  calib->add_option("--out", out, "Write the report here as well");

  auto* select = app.add_subcommand("select", "Accept and print a program, or abstain");
  select->add_option("--scored,--in", scored, "Scored records JSONL")->required();
  select->add_option("--tau", tau_text, "Accept iff score <= tau")->required();
  select->add_option("--method", method, "edse, ese, normalized_u, pe, dse:<m>, se:<m>");
  select->add_option("--problem", problem, "Problem id when the file holds several");
  select->add_option("--rule", rule)->check(CLI::IsMember({"longest", "seeded_uniform"}));

  auto* cascade = app.add_subcommand("cascade", "Run the multi-layer cascade");
  cascade->add_option("--bundles", bundles, "Problem bundles JSONL")->required();
  cascade->add_option("--config", config, "Cascade config JSON")->required();
  cascade->add_option("--out", out, "Results JSONL (CSV with --sweep)");
  cascade->add_option("--sweep", sweep, "Grid such as tau=0.2,0.3,0.4,0.5;alpha=0.5");
  cascade->add_flag("--resume", resume, "Skip problems already in --out");

  auto* analyze = app.add_subcommand("analyze-clusters", "Largest-cluster histograms");
  analyze->add_option("--bundles", bundles, "Problem bundles JSONL")->required();
  analyze->add_option("--samples", samples, "Candidate programs JSONL")->required();
  analyze->add_option("--k", k, "Cluster size threshold");
  analyze->add_option("--min-incorrect", min_incorrect, "Minimum incorrect samples");
  analyze->add_option("--out", out, "Write the report here as well");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  Context c;
  if (esekit_context_new(&c.ctx) != ESEKIT_OK) {
    std::cerr << "esekit: cannot allocate context\n";
    return 3;
  }
  esekit_status s = esekit_set_jobs(c.ctx, jobs);
  if (s == ESEKIT_OK && *seed_opt) s = esekit_set_seed(c.ctx, seed);
  if (s == ESEKIT_OK && !profiles.empty()) s = esekit_load_profiles(c.ctx, profiles.c_str());
  if (s != ESEKIT_OK) return report_failure(c.ctx, s);

  auto print_and_maybe_save = [&](const std::string& payload) {
    std::cout << payload << "\n";
    if (!out.empty() && !write_text(out, payload + "\n")) {
      std::cerr << "esekit: cannot write '" << out << "'\n";
      return 3;
    }
    return 0;
  };

  if (score->parsed()) {
    Json req{{"bundles", bundles}, {"samples", samples}, {"out", out},
             {"mode", mode},       {"rule", rule},       {"invalid_cluster", invalid_cluster}};
    return call(c.ctx, esekit_score, req, [&](const std::string& summary) {
      std::cout << summary << "\n";
      const Json j = Json::parse(summary);
      for (const auto& f : j["failed"]) {
        std::cerr << "esekit: " << f["problem_id"].get<std::string>() << ": "
                  << f["error"].get<std::string>() << "\n";
      }
      std::cerr << "scored " << j["scored"] << " of " << j["problems"] << " problems";
      const auto& corr = j["correlation_with_mean_correctness"];
      for (const char* m : {"normalized_u", "edse"}) {
        if (corr.contains(m) && corr[m].contains("r")) {
          std::cerr << "; pearson(" << m << ", mean correctness) r=" << corr[m]["r"]
                    << " p=" << corr[m]["p_value"];
        }
      }
      std::cerr << "\n";
      return j["failed"].empty() ? 0 : 1;
    });
  }
  if (calib->parsed()) {
    Json req{{"scored", scored}, {"fpr", fpr}};
    return call(c.ctx, esekit_calibrate, req, print_and_maybe_save);
  }
  if (select->parsed()) {
    Json req{{"scored", scored}, {"tau", tau_text}, {"method", method}, {"rule", rule}};
    if (!problem.empty()) req["problem"] = problem;
    return call(c.ctx, esekit_select, req, [&](const std::string& payload) {
      const Json j = Json::parse(payload);
      if (!j["accepted"].get<bool>()) {
        std::cerr << j["reason"].get<std::string>() << "\n";
        return 1;
      }
      std::cout << j["source"].get<std::string>();
      std::cerr << "selected " << j["sample_id"].get<std::string>() << "\n";
      return 0;
    });
  }
  if (cascade->parsed()) {
    if (!sweep.empty()) {
      Json req{{"bundles", bundles}, {"config", config}, {"sweep", sweep}};
      if (!out.empty()) req["log_prefix"] = out;
      return call(c.ctx, esekit_sweep, req, [&](const std::string& csv) {
        std::cout << csv;
        if (!out.empty() && !write_text(out, csv)) {
          std::cerr << "esekit: cannot write '" << out << "'\n";
          return 3;
        }
        return 0;
      });
    }
    if (out.empty()) {
      std::cerr << "esekit: cascade needs --out for the per-problem results log\n";
      return 2;
    }
    Json req{{"bundles", bundles}, {"config", config}, {"out", out}, {"resume", resume}};
    return call(c.ctx, esekit_cascade, req, [&](const std::string& summary) {
      std::cout << summary << "\n";
      const Json j = Json::parse(summary);
      if (j["no_solution"].get<std::size_t>() > 0) {
        std::cerr << "esekit: " << j["no_solution"] << " problem(s) ended without a solution\n";
        return 1;
      }
      return 0;
    });
  }
  if (analyze->parsed()) {
    Json req{{"bundles", bundles}, {"samples", samples}, {"k", k}, {"min_incorrect", min_incorrect}};
    return call(c.ctx, esekit_analyze_clusters, req, print_and_maybe_save);
  }
  return 2;
}

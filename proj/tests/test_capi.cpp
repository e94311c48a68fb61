// Uses nothing but the public C header and the shared library.
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>
#include <string>
#include <unistd.h>

#include "doctest.h"
#include "esekit/esekit.h"

namespace {

struct Ctx {
  esekit_context* c = nullptr;
  Ctx() { REQUIRE(esekit_context_new(&c) == ESEKIT_OK); }
  ~Ctx() { esekit_context_free(c); }
};

std::string take(char* s) {
  std::string out = s ? s : "";
  esekit_string_free(s);
  return out;
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string scratch(const std::string& name) {
  return "/tmp/esekit-capi-" + std::to_string(::getpid()) + "-" + name;
}

const std::string kDemo = std::string(ESEKIT_SOURCE_DIR) + "/demo/";

}  // namespace

TEST_CASE("version and context lifecycle") {
  CHECK(std::strlen(esekit_version()) > 0);
  CHECK(esekit_context_new(nullptr) == ESEKIT_USAGE);
  esekit_context_free(nullptr);
  Ctx ctx;
  CHECK(std::string(esekit_last_error(ctx.c)).empty());
  CHECK(esekit_set_jobs(ctx.c, 0) == ESEKIT_USAGE);
  CHECK(std::string(esekit_last_error(ctx.c)).find("jobs") != std::string::npos);
  CHECK(esekit_set_jobs(ctx.c, 2) == ESEKIT_OK);
  CHECK(std::string(esekit_last_error(ctx.c)).empty());
}

TEST_CASE("numeric entry points") {
  Ctx ctx;
  const double p[] = {0.5, 0.5};
  double h = 0;
  REQUIRE(esekit_entropy(ctx.c, p, 2, &h) == ESEKIT_OK);
  CHECK(std::abs(h - std::log(2.0)) < 1e-15);

  const double probs[] = {2.0 / 3, 1.0 / 3, 0.0, 1.0};
  double e = 0, within = 0, jsd = 0;
  REQUIRE(esekit_ensemble_entropy(ctx.c, probs, 2, 2, &e, &within, &jsd) == ESEKIT_OK);
  CHECK(e == doctest::Approx(0.636514).epsilon(1e-6));
  CHECK(std::abs(e - within - jsd) < 1e-12);

  double u = 0;
  REQUIRE(esekit_normalized_uncertainty(ctx.c, std::log(2.0), 2, &u) == ESEKIT_OK);
  CHECK(std::abs(u - 1.0) < 1e-15);

  double s = 0;
  REQUIRE(esekit_cascade_score(ctx.c, 1.0, 0.0, 0.5, &s) == ESEKIT_OK);
  CHECK(s == 0.5);

  const double xs[] = {1, 2, 3, 4}, ys[] = {-1, -2, -3, -4};
  double r = 0, pv = 1;
  REQUIRE(esekit_pearson(ctx.c, xs, ys, 4, &r, &pv) == ESEKIT_OK);
  CHECK(r == doctest::Approx(-1.0));

  CHECK(esekit_entropy(ctx.c, nullptr, 2, &h) == ESEKIT_USAGE);
  CHECK(esekit_pearson(ctx.c, xs, ys, 2, &r, &pv) == ESEKIT_DOMAIN);
}

TEST_CASE("status codes for bad requests") {
  Ctx ctx;
  char* out = nullptr;
  CHECK(esekit_score(ctx.c, "{not json", &out) == ESEKIT_USAGE);
  CHECK(out == nullptr);
  CHECK(esekit_score(ctx.c, "{}", &out) == ESEKIT_USAGE);
  CHECK(std::string(esekit_last_error(ctx.c)).find("bundles") != std::string::npos);
  const std::string missing = R"({"bundles":"/nonexistent/b.jsonl","samples":"/nonexistent/s.jsonl","out":"/tmp/x"})";
  CHECK(esekit_score(ctx.c, missing.c_str(), &out) == ESEKIT_ENVIRONMENT);
  CHECK(esekit_load_profiles(ctx.c, "/nonexistent/profiles.json") == ESEKIT_ENVIRONMENT);
}

TEST_CASE("score, calibrate and select through the C API") {
  Ctx ctx;
  const std::string out = scratch("scored.jsonl");
  const std::string req = R"({"bundles":")" + kDemo + R"(cascade_bundles.jsonl","samples":")" + kDemo +
                          R"(score_samples.jsonl","out":")" + out + R"("})";
  char* res = nullptr;
  REQUIRE(esekit_score(ctx.c, req.c_str(), &res) == ESEKIT_OK);
  const std::string summary = take(res);
  CHECK(summary.find("\"problems\"") != std::string::npos);
  const std::string first = slurp(out);
  CHECK_FALSE(first.empty());

  // same inputs, same bytes
  REQUIRE(esekit_score(ctx.c, req.c_str(), &res) == ESEKIT_OK);
  take(res);
  CHECK(slurp(out) == first);

  const std::string cal = R"({"scored":")" + out + R"(","fpr":[0.1]})";
  CHECK(esekit_calibrate(ctx.c, cal.c_str(), &res) == ESEKIT_OK);
  CHECK(take(res).find("operating_points") != std::string::npos);

  const std::string sel = R"({"scored":")" + out + R"(","problem":"sum","tau":0.3})";
  REQUIRE(esekit_select(ctx.c, sel.c_str(), &res) == ESEKIT_OK);
  CHECK(take(res).find("\"accepted\":true") != std::string::npos);
  const std::string never = R"({"scored":")" + out + R"(","problem":"sum","tau":"-inf"})";
  REQUIRE(esekit_select(ctx.c, never.c_str(), &res) == ESEKIT_OK);
  CHECK(take(res).find("\"accepted\":false") != std::string::npos);

  std::remove(out.c_str());
  std::remove((out + ".manifest.json").c_str());
}

TEST_CASE("cascade and sweep through the C API") {
  Ctx ctx;
  const std::string out = scratch("cascade.jsonl");
  const std::string req = R"({"bundles":")" + kDemo + R"(cascade_bundles.jsonl","config":")" + kDemo +
                          R"(cascade.json","out":")" + out + R"("})";
  char* res = nullptr;
  REQUIRE(esekit_cascade(ctx.c, req.c_str(), &res) == ESEKIT_OK);
  CHECK(take(res).find("\"problems\":4") != std::string::npos);

  const std::string sw = R"({"bundles":")" + kDemo + R"(cascade_bundles.jsonl","config":")" + kDemo +
                         R"(cascade.json","sweep":"tau=0.2,0.5"})";
  REQUIRE(esekit_sweep(ctx.c, sw.c_str(), &res) == ESEKIT_OK);
  const std::string csv = take(res);
  CHECK(csv.rfind("tau1,alpha1,", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 3);

  for (const char* suffix : {"", ".summary.json", ".manifest.json"}) std::remove((out + suffix).c_str());
}

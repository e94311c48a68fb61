#include "esekit/decision.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "esekit/error.hpp"
#include "esekit/util.hpp"

namespace esekit {

bool accept(double u, double tau) { return u <= tau; }

std::string_view to_string(SelectionRule r) {
  return r == SelectionRule::Longest ? "longest" : "seeded_uniform";
}

SelectionRule parse_selection_rule(std::string_view s) {
  if (s == "longest") return SelectionRule::Longest;
  if (s == "seeded_uniform") return SelectionRule::SeededUniform;
  fail_usage("unknown selection rule '" + std::string(s) +
             "' (expected longest or seeded_uniform)");
}

std::string select_member(const Cluster& cluster,
                          const std::map<std::string, std::size_t>& source_length,
                          SelectionRule rule, std::uint64_t seed) {
  if (cluster.members.empty()) fail_domain("select_member: empty cluster");
  if (rule == SelectionRule::SeededUniform) {
    Rng rng(derive_seed(seed, cluster.cluster_id));
    return cluster.members[rng.below(cluster.members.size())];
  }
  // members are sorted, so the first maximum has the smallest sample_id
  const std::string* best = nullptr;
  std::size_t best_len = 0;
  for (const auto& m : cluster.members) {
    auto it = source_length.find(m);
    if (it == source_length.end()) {
      fail_domain("select_member: unknown sample '" + m + "'");
    }
    if (!best || it->second > best_len) {
      best = &m;
      best_len = it->second;
    }
  }
  return *best;
}

const CandidateProgram& select_program(const SemanticPartition& partition,
                                       const SampleSet& samples, SelectionRule rule,
                                       std::uint64_t seed) {
  if (partition.empty()) fail_domain("select_program: empty partition");
  std::map<std::string, std::size_t> lengths;
  for (const auto& s : samples.samples) lengths.emplace(s.sample_id, s.source.size());
  const std::string id = select_member(partition.clusters.front(), lengths, rule, seed);
  return *samples.find(id);
}

RocCurve roc_sweep(const std::vector<double>& uncertainties,
                   const std::vector<bool>& labels) {
  if (uncertainties.size() != labels.size()) {
    fail_domain("roc_sweep: uncertainties and labels differ in length");
  }
  RocCurve curve;
  for (bool pass : labels) (pass ? curve.positives : curve.negatives)++;
  if (curve.positives == 0 || curve.negatives == 0) {
    fail_domain("roc_sweep: labels must contain at least one pass and one fail");
  }
  for (double u : uncertainties) {
    if (!std::isfinite(u)) fail_domain("roc_sweep: non-finite uncertainty");
  }
  std::vector<std::size_t> order(uncertainties.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return uncertainties[a] < uncertainties[b];
  });
  const double pos = static_cast<double>(curve.positives);
  const double neg = static_cast<double>(curve.negatives);
  curve.points.push_back({kAcceptNothing, 0.0, 0.0});
  std::size_t tp = 0, fp = 0;
  for (std::size_t i = 0; i < order.size();) {
    const double v = uncertainties[order[i]];
    while (i < order.size() && uncertainties[order[i]] == v) {
      (labels[order[i]] ? tp : fp)++;
      ++i;
    }
    curve.points.push_back({v, static_cast<double>(fp) / neg,
                            static_cast<double>(tp) / pos});
  }
  return curve;
}

OperatingPoint tpr_at_fpr(const RocCurve& curve, double constraint) {
  if (!(constraint > 0.0 && constraint <= 1.0)) {
    fail_usage("tpr_at_fpr: constraint must lie in (0, 1]");
  }
  OperatingPoint best;
  for (const auto& p : curve.points) {
    if (p.fpr > constraint) break;
    best = {p.tpr, p.fpr, p.threshold};
  }
  return best;
}

double accuracy_at(const std::vector<double>& uncertainties,
                   const std::vector<bool>& labels, double threshold) {
  if (uncertainties.size() != labels.size()) {
    fail_domain("accuracy_at: uncertainties and labels differ in length");
  }
  if (labels.empty()) fail_domain("accuracy_at: empty input");
  std::size_t right = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (accept(uncertainties[i], threshold) == labels[i]) ++right;
  }
  return static_cast<double>(right) / static_cast<double>(labels.size());
}

namespace {

// Continued fraction for I_x(a,b), modified Lentz.
double beta_continued_fraction(double a, double b, double x) {
  constexpr int kMaxIter = 10000;
  constexpr double kEps = 1e-16;
  constexpr double kTiny = 1e-300;
  const double qab = a + b;
  const double qap = a + 1.0;
  const double qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::fabs(d) < kTiny) d = kTiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= kMaxIter; ++m) {
    const double m2 = 2.0 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::fabs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::fabs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::fabs(del - 1.0) < kEps) return h;
  }
  return h;
}

}  // namespace

double regularized_incomplete_beta(double a, double b, double x) {
  if (!(a > 0.0 && b > 0.0)) fail_domain("incomplete beta: a and b must be positive");
  if (x <= 0.0) return 0.0;
  if (x >= 1.0) return 1.0;
  const double log_front = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) +
                           a * std::log(x) + b * std::log1p(-x);
  const double front = std::exp(log_front);
  if (x < (a + 1.0) / (a + b + 2.0)) {
    return front * beta_continued_fraction(a, b, x) / a;
  }
  return 1.0 - front * beta_continued_fraction(b, a, 1.0 - x) / b;
}

double student_t_two_sided_p(double t, double dof) {
  if (std::isinf(t)) return 0.0;
  const double x = dof / (dof + t * t);
  return std::clamp(regularized_incomplete_beta(dof / 2.0, 0.5, x), 0.0, 1.0);
}

CorrelationResult pearson(const std::vector<double>& xs, const std::vector<double>& ys) {
  if (xs.size() != ys.size()) fail_domain("pearson: vectors differ in length");
  const std::size_t n = xs.size();
  if (n < 3) fail_domain("pearson: need at least 3 points");
  const double nn = static_cast<double>(n);
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += xs[i];
    my += ys[i];
  }
  mx /= nn;
  my /= nn;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double dx = xs[i] - mx;
    const double dy = ys[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx == 0.0 || syy == 0.0) {
    fail_domain("pearson: constant input vector, correlation undefined");
  }
  CorrelationResult res;
  res.n = n;
  res.r = std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
  const double dof = nn - 2.0;
  // With x = dof / (dof + t^2) = 1 - r^2, evaluated as (1-r)(1+r).
  const double one_minus_r2 = (1.0 - res.r) * (1.0 + res.r);
  res.p_value = one_minus_r2 <= 0.0
                    ? 0.0
                    : std::clamp(regularized_incomplete_beta(dof / 2.0, 0.5, one_minus_r2),
                                 0.0, 1.0);
  return res;
}

void to_json(Json& j, const Decision& d) {
  j = Json{{"accepted", d.accepted}, {"threshold", d.threshold}, {"score_used", d.score_used}};
  if (d.selected_sample_id) j["selected_sample_id"] = *d.selected_sample_id;
}

void to_json(Json& j, const RocPoint& p) {
  j = Json{{"fpr", p.fpr}, {"tpr", p.tpr}};
  if (std::isfinite(p.threshold)) {
    j["threshold"] = p.threshold;
  } else {
    j["threshold"] = "-inf";
  }
}

void to_json(Json& j, const CorrelationResult& c) {
  j = Json{{"r", c.r}, {"p_value", c.p_value}, {"n", c.n}};
}

}  // namespace esekit

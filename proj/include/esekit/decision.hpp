#pragma once

#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "esekit/clustering.hpp"
#include "esekit/domain.hpp"

namespace esekit {

// Accept the sampled programs iff u <= tau (inclusive boundary).
bool accept(double u, double tau);

enum class SelectionRule { Longest, SeededUniform };

std::string_view to_string(SelectionRule r);
SelectionRule parse_selection_rule(std::string_view s);

struct Decision {
  bool accepted = false;
  double threshold = 0.0;
  double score_used = 0.0;
  std::optional<std::string> selected_sample_id;  // present iff accepted
};

// Majority vote: the first cluster in canonical order (largest, then
// smallest id). Longest picks the member with the most source bytes (ties
// to the smallest sample_id); SeededUniform draws a member with `seed`.
const CandidateProgram& select_program(const SemanticPartition& partition,
                                       const SampleSet& samples, SelectionRule rule,
                                       std::uint64_t seed = 0);

std::string select_member(const Cluster& cluster,
                          const std::map<std::string, std::size_t>& source_length,
                          SelectionRule rule, std::uint64_t seed);

inline constexpr double kAcceptNothing = -std::numeric_limits<double>::infinity();

struct RocPoint {
  double threshold;  // accept iff u <= threshold
  double fpr;
  double tpr;
};

// Points ordered from strictest (threshold -inf, accept nothing) to most
// lenient (largest observed u, accept everything).
struct RocCurve {
  std::vector<RocPoint> points;
  std::size_t positives = 0;  // pass labels
  std::size_t negatives = 0;  // fail labels
};

// labels[i] true = pass. Requires at least one pass and one fail.
RocCurve roc_sweep(const std::vector<double>& uncertainties,
                   const std::vector<bool>& labels);

struct OperatingPoint {
  double tpr = 0.0;
  double fpr = 0.0;
  double threshold = kAcceptNothing;
};

// Highest TPR among sweep points with FPR <= constraint, at the most lenient
// such threshold. Falls back to the accept-nothing point.
OperatingPoint tpr_at_fpr(const RocCurve& curve, double constraint);

// (accepted passes + rejected fails) / n at the given threshold.
double accuracy_at(const std::vector<double>& uncertainties,
                   const std::vector<bool>& labels, double threshold);

struct CorrelationResult {
  double r = 0.0;
  double p_value = 1.0;  // two-sided
  std::size_t n = 0;
};

CorrelationResult pearson(const std::vector<double>& xs, const std::vector<double>& ys);

// Regularized incomplete beta I_x(a, b) by continued fraction.
double regularized_incomplete_beta(double a, double b, double x);

// Two-sided p-value of Student's t with `dof` degrees of freedom.
double student_t_two_sided_p(double t, double dof);

void to_json(Json& j, const Decision& d);
void to_json(Json& j, const RocPoint& p);
void to_json(Json& j, const CorrelationResult& c);

}  // namespace esekit

#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "esekit/clustering.hpp"
#include "esekit/domain.hpp"

namespace esekit {

// Probability mass over the semantic clusters of one partition.
using ClusterProbs = std::map<std::string, double>;

struct ModelSemanticDistribution {
  std::string model_id;
  ClusterProbs probs;
};

struct AggregatedDistribution {
  ClusterProbs probs;
  std::size_t member_count = 0;
};

enum class EntropyMode { Blackbox, Graybox };

std::string_view to_string(EntropyMode m);
EntropyMode parse_entropy_mode(std::string_view s);

struct UncertaintyReport {
  std::string problem_id;
  std::optional<double> pe;
  std::map<std::string, double> se_per_model;
  std::map<std::string, double> dse_per_model;
  std::optional<double> ese;
  double edse = 0.0;
  // Decomposition of the headline entropy (ese in graybox, edse otherwise).
  double mean_within = 0.0;
  double jsd = 0.0;
  double normalized_u = 0.0;
  std::size_t cluster_count = 0;
  EntropyMode method = EntropyMode::Blackbox;

  double headline() const { return ese.value_or(edse); }
};

void to_json(Json& j, const UncertaintyReport& r);
void from_json(const Json& j, UncertaintyReport& r);

// p[c] = (# of the model's samples in c) / K.
ModelSemanticDistribution empirical_distribution(
    const std::string& model_id, const std::vector<std::string>& sample_ids,
    const SemanticPartition& partition);

// Weights exp(log_likelihood / token_count), renormalized over the set.
ModelSemanticDistribution likelihood_distribution(
    const std::string& model_id,
    const std::vector<const CandidateProgram*>& samples,
    const SemanticPartition& partition);

// Uniform-weight mixture of the member distributions.
AggregatedDistribution aggregate(const std::vector<ModelSemanticDistribution>& dists);

// -sum p ln p in nats, with 0 ln 0 = 0. Summation runs over the sorted
// probability values, so relabeling clusters never changes the result.
double shannon_entropy(const ClusterProbs& p);

struct Decomposition {
  double mean_within = 0.0;  // mean of the member entropies
  double jsd = 0.0;          // uniform-weight Jensen-Shannon divergence
};

// JSD is computed as the mean KL divergence of each member to the mixture,
// independently of the mixture entropy, so the identity
// H(mixture) = mean_within + jsd is a checkable property.
Decomposition decompose(const std::vector<ModelSemanticDistribution>& dists);

// Mean over samples of -(log_likelihood / token_count).
double predictive_entropy(const std::vector<const CandidateProgram*>& samples);

// h / ln(cluster_count) for two or more clusters, else 0; clamped to [0,1].
double normalized_uncertainty(double h, std::size_t cluster_count);

// Entropy report for one problem. Blackbox fills the frequency-based
// values; graybox additionally fills se/ese/pe from sequence likelihoods.
// Models with no clustered sample are skipped.
UncertaintyReport uncertainty_report(const SampleSet& samples,
                                     const SemanticPartition& partition,
                                     EntropyMode mode);

}  // namespace esekit

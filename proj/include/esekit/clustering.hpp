#pragma once

#include <cstddef>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "esekit/domain.hpp"
#include "esekit/exec.hpp"

namespace esekit {

struct Cluster {
  std::string cluster_id;            // equivalence key (fingerprint digest)
  std::vector<std::string> members;  // sorted
  std::map<std::string, std::size_t> per_model_counts;

  std::size_t size() const { return members.size(); }
  bool operator==(const Cluster&) const = default;
};

struct SemanticPartition {
  std::vector<Cluster> clusters;  // size desc, then cluster_id asc
  std::size_t total_samples = 0;

  bool empty() const { return clusters.empty(); }
  const Cluster* cluster_of(const std::string& sample_id) const;
  bool operator==(const SemanticPartition&) const = default;
};

// Maps a fingerprint to its equivalence key. Only the functional
// (execution-output) provider ships; the seam admits others.
using EquivalenceKey = std::function<std::string(const BehaviorFingerprint&)>;

EquivalenceKey functional_equivalence();

// Groups fingerprints whose keys are equal. All fingerprints must have the
// same number of outcomes; sample ids must be unique.
SemanticPartition partition(
    const std::vector<BehaviorFingerprint>& fingerprints,
    const std::map<std::string, std::string>& model_of,
    const EquivalenceKey& key = functional_equivalence());

// Restricts a partition to the members of one model (canonical order kept).
SemanticPartition restrict_to_model(const SemanticPartition& p,
                                    const std::map<std::string, std::string>& model_of,
                                    const std::string& model);

std::size_t largest_cluster_size(const SemanticPartition& p);

struct LargestClusterStats {
  std::map<std::size_t, std::size_t> histogram;  // max size -> problems
  std::size_t problems = 0;                       // after filtering
  std::size_t at_least_k = 0;
  std::size_t k = 5;
  double fraction_at_least_k() const {
    return problems == 0 ? 0.0
                         : static_cast<double>(at_least_k) / static_cast<double>(problems);
  }
};

struct IncorrectFilter {
  std::size_t min_incorrect = 3;
  // correct[i][sample_id] for partition i; a sample is incorrect when false.
  const std::vector<std::map<std::string, bool>>* correct = nullptr;
};

// Histogram of largest-cluster sizes; with a filter, only partitions having
// at least min_incorrect incorrect members count.
LargestClusterStats largest_cluster_stats(
    const std::vector<SemanticPartition>& partitions, std::size_t k,
    std::optional<IncorrectFilter> filter = std::nullopt);

void to_json(Json& j, const Cluster& c);
void from_json(const Json& j, Cluster& c);
void to_json(Json& j, const SemanticPartition& p);
void from_json(const Json& j, SemanticPartition& p);
void to_json(Json& j, const LargestClusterStats& s);

}  // namespace esekit

#include "esekit/clustering.hpp"

#include <algorithm>
#include <set>
#include <unordered_map>

#include "esekit/error.hpp"

namespace esekit {

namespace {

void canonical_order(std::vector<Cluster>& clusters) {
  std::sort(clusters.begin(), clusters.end(), [](const Cluster& a, const Cluster& b) {
    if (a.size() != b.size()) return a.size() > b.size();
    return a.cluster_id < b.cluster_id;
  });
}

}  // namespace

const Cluster* SemanticPartition::cluster_of(const std::string& sample_id) const {
  for (const auto& c : clusters) {
    if (std::binary_search(c.members.begin(), c.members.end(), sample_id)) return &c;
  }
  return nullptr;
}

EquivalenceKey functional_equivalence() {
  return [](const BehaviorFingerprint& fp) { return fp.digest; };
}

SemanticPartition partition(const std::vector<BehaviorFingerprint>& fingerprints,
                            const std::map<std::string, std::string>& model_of,
                            const EquivalenceKey& key) {
  SemanticPartition out;
  if (fingerprints.empty()) return out;
  const std::size_t width = fingerprints.front().outcomes.size();
  std::unordered_map<std::string, std::size_t> by_key;
  std::set<std::string> seen;
  for (const auto& fp : fingerprints) {
    if (fp.outcomes.size() != width) {
      fail_domain("partition: fingerprints have mixed lengths (" +
                  std::to_string(width) + " vs " +
                  std::to_string(fp.outcomes.size()) + ")");
    }
    if (!seen.insert(fp.sample_id).second) {
      fail_domain("partition: duplicate sample_id '" + fp.sample_id + "'");
    }
    auto model = model_of.find(fp.sample_id);
    if (model == model_of.end()) {
      fail_domain("partition: no model recorded for sample '" + fp.sample_id + "'");
    }
    std::string k = key(fp);
    auto [it, inserted] = by_key.emplace(k, out.clusters.size());
    if (inserted) {
      out.clusters.emplace_back();
      out.clusters.back().cluster_id = std::move(k);
    }
    Cluster& c = out.clusters[it->second];
    c.members.push_back(fp.sample_id);
    ++c.per_model_counts[model->second];
  }
  for (auto& c : out.clusters) std::sort(c.members.begin(), c.members.end());
  canonical_order(out.clusters);
  out.total_samples = fingerprints.size();
  return out;
}

SemanticPartition restrict_to_model(const SemanticPartition& p,
                                    const std::map<std::string, std::string>& model_of,
                                    const std::string& model) {
  SemanticPartition out;
  for (const auto& c : p.clusters) {
    Cluster r;
    r.cluster_id = c.cluster_id;
    for (const auto& m : c.members) {
      auto it = model_of.find(m);
      if (it != model_of.end() && it->second == model) r.members.push_back(m);
    }
    if (r.members.empty()) continue;
    r.per_model_counts[model] = r.members.size();
    out.total_samples += r.members.size();
    out.clusters.push_back(std::move(r));
  }
  canonical_order(out.clusters);
  return out;
}

std::size_t largest_cluster_size(const SemanticPartition& p) {
  return p.clusters.empty() ? 0 : p.clusters.front().size();
}

LargestClusterStats largest_cluster_stats(
    const std::vector<SemanticPartition>& partitions, std::size_t k,
    std::optional<IncorrectFilter> filter) {
  if (partitions.empty()) fail_domain("largest_cluster_stats: no partitions");
  if (filter && (!filter->correct || filter->correct->size() != partitions.size())) {
    fail_domain("largest_cluster_stats: correctness labels must align with partitions");
  }
  LargestClusterStats s;
  s.k = k;
  for (std::size_t i = 0; i < partitions.size(); ++i) {
    const auto& p = partitions[i];
    if (filter) {
      const auto& labels = (*filter->correct)[i];
      std::size_t incorrect = 0;
      for (const auto& c : p.clusters) {
        for (const auto& m : c.members) {
          auto it = labels.find(m);
          if (it == labels.end()) {
            fail_domain("largest_cluster_stats: no correctness label for '" + m + "'");
          }
          if (!it->second) ++incorrect;
        }
      }
      if (incorrect < filter->min_incorrect) continue;
    }
    const std::size_t m = largest_cluster_size(p);
    ++s.histogram[m];
    ++s.problems;
    if (m >= k) ++s.at_least_k;
  }
  return s;
}

void to_json(Json& j, const Cluster& c) {
  j = Json{{"cluster_id", c.cluster_id},
           {"members", c.members},
           {"per_model_counts", c.per_model_counts}};
}

void from_json(const Json& j, Cluster& c) {
  c.cluster_id = j.at("cluster_id").get<std::string>();
  c.members = j.at("members").get<std::vector<std::string>>();
  c.per_model_counts = j.at("per_model_counts").get<std::map<std::string, std::size_t>>();
}

void to_json(Json& j, const SemanticPartition& p) {
  j = Json{{"clusters", p.clusters}, {"total_samples", p.total_samples}};
}

void from_json(const Json& j, SemanticPartition& p) {
  p.clusters = j.at("clusters").get<std::vector<Cluster>>();
  p.total_samples = j.at("total_samples").get<std::size_t>();
}

void to_json(Json& j, const LargestClusterStats& s) {
  Json hist = Json::object();
  for (const auto& [size, count] : s.histogram) hist[std::to_string(size)] = count;
  j = Json{{"histogram", hist},
           {"problems", s.problems},
           {"k", s.k},
           {"at_least_k", s.at_least_k},
           {"fraction_at_least_k", s.fraction_at_least_k()}};
}

}  // namespace esekit

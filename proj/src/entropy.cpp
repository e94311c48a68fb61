#include "esekit/entropy.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "esekit/error.hpp"

namespace esekit {

namespace {

double plogp(double p) { return p > 0.0 ? p * std::log(p) : 0.0; }

// Members of `model` per cluster id, restricted to the given sample ids.
std::map<std::string, std::string> cluster_index(const SemanticPartition& partition) {
  std::map<std::string, std::string> idx;
  for (const auto& c : partition.clusters) {
    for (const auto& m : c.members) idx.emplace(m, c.cluster_id);
  }
  return idx;
}

}  // namespace

std::string_view to_string(EntropyMode m) {
  return m == EntropyMode::Graybox ? "graybox" : "blackbox";
}

EntropyMode parse_entropy_mode(std::string_view s) {
  if (s == "graybox") return EntropyMode::Graybox;
  if (s == "blackbox") return EntropyMode::Blackbox;
  fail_usage("unknown entropy mode '" + std::string(s) +
             "' (expected graybox or blackbox)");
}

ModelSemanticDistribution empirical_distribution(
    const std::string& model_id, const std::vector<std::string>& sample_ids,
    const SemanticPartition& partition) {
  const auto idx = cluster_index(partition);
  std::map<std::string, std::size_t> counts;
  std::size_t k = 0;
  for (const auto& id : sample_ids) {
    auto it = idx.find(id);
    if (it == idx.end()) continue;
    ++counts[it->second];
    ++k;
  }
  if (k == 0) {
    fail_domain("empirical_distribution: model '" + model_id +
                "' has no clustered samples");
  }
  ModelSemanticDistribution d;
  d.model_id = model_id;
  for (const auto& [cid, n] : counts) {
    d.probs[cid] = static_cast<double>(n) / static_cast<double>(k);
  }
  return d;
}

ModelSemanticDistribution likelihood_distribution(
    const std::string& model_id, const std::vector<const CandidateProgram*>& samples,
    const SemanticPartition& partition) {
  const auto idx = cluster_index(partition);
  std::vector<std::pair<std::string, double>> logw;
  for (const CandidateProgram* s : samples) {
    auto it = idx.find(s->sample_id);
    if (it == idx.end()) continue;
    if (!s->sequence_log_likelihood || !s->token_count) {
      fail_domain("likelihood_distribution: sample '" + s->sample_id +
                  "' has no sequence_log_likelihood/token_count; use the "
                  "blackbox (frequency) estimator");
    }
    logw.emplace_back(it->second, *s->sequence_log_likelihood /
                                      static_cast<double>(*s->token_count));
  }
  if (logw.empty()) {
    fail_domain("likelihood_distribution: model '" + model_id +
                "' has no clustered samples");
  }
  // log-sum-exp renormalization
  double mx = -std::numeric_limits<double>::infinity();
  for (const auto& [cid, lw] : logw) mx = std::max(mx, lw);
  double z = 0.0;
  for (const auto& [cid, lw] : logw) z += std::exp(lw - mx);
  ModelSemanticDistribution d;
  d.model_id = model_id;
  for (const auto& [cid, lw] : logw) d.probs[cid] += std::exp(lw - mx) / z;
  return d;
}

AggregatedDistribution aggregate(const std::vector<ModelSemanticDistribution>& dists) {
  if (dists.empty()) fail_domain("aggregate: no member distributions");
  AggregatedDistribution out;
  out.member_count = dists.size();
  for (const auto& d : dists) {
    for (const auto& [cid, p] : d.probs) out.probs[cid] += p;
  }
  const double l = static_cast<double>(dists.size());
  for (auto& [cid, p] : out.probs) p /= l;
  return out;
}

double shannon_entropy(const ClusterProbs& p) {
  std::vector<double> values;
  values.reserve(p.size());
  for (const auto& [cid, v] : p) values.push_back(v);
  std::sort(values.begin(), values.end());
  double h = 0.0;
  for (double v : values) h -= plogp(v);
  return h > 0.0 ? h : 0.0;
}

Decomposition decompose(const std::vector<ModelSemanticDistribution>& dists) {
  if (dists.empty()) fail_domain("decompose: no member distributions");
  const AggregatedDistribution mix = aggregate(dists);
  Decomposition out;
  const double l = static_cast<double>(dists.size());
  double within = 0.0;
  double kl_sum = 0.0;
  for (const auto& d : dists) {
    within += shannon_entropy(d.probs);
    double kl = 0.0;
    for (const auto& [cid, p] : d.probs) {
      if (p > 0.0) kl += p * std::log(p / mix.probs.at(cid));
    }
    kl_sum += kl;
  }
  out.mean_within = within / l;
  out.jsd = kl_sum / l;
  return out;
}

double predictive_entropy(const std::vector<const CandidateProgram*>& samples) {
  if (samples.empty()) fail_domain("predictive_entropy: no samples");
  double sum = 0.0;
  for (const CandidateProgram* s : samples) {
    if (!s->sequence_log_likelihood || !s->token_count) {
      fail_domain("predictive_entropy: sample '" + s->sample_id +
                  "' has no sequence_log_likelihood/token_count");
    }
    sum += -*s->sequence_log_likelihood / static_cast<double>(*s->token_count);
  }
  return sum / static_cast<double>(samples.size());
}

double normalized_uncertainty(double h, std::size_t cluster_count) {
  if (cluster_count < 2) return 0.0;
  const double u = h / std::log(static_cast<double>(cluster_count));
  return std::clamp(u, 0.0, 1.0);
}

UncertaintyReport uncertainty_report(const SampleSet& samples,
                                     const SemanticPartition& partition,
                                     EntropyMode mode) {
  if (partition.empty()) fail_domain("uncertainty_report: empty partition");
  UncertaintyReport r;
  r.problem_id = samples.problem_id;
  r.method = mode;
  r.cluster_count = partition.clusters.size();

  const auto idx = cluster_index(partition);
  std::vector<ModelSemanticDistribution> empirical;
  std::vector<ModelSemanticDistribution> weighted;
  std::vector<const CandidateProgram*> clustered;
  for (const auto& [model, ids] : samples.grouping) {
    std::vector<const CandidateProgram*> members;
    for (const auto& id : ids) {
      if (idx.count(id)) members.push_back(samples.find(id));
    }
    if (members.empty()) continue;
    clustered.insert(clustered.end(), members.begin(), members.end());
    empirical.push_back(empirical_distribution(model, ids, partition));
    r.dse_per_model[model] = shannon_entropy(empirical.back().probs);
    if (mode == EntropyMode::Graybox) {
      weighted.push_back(likelihood_distribution(model, members, partition));
      r.se_per_model[model] = shannon_entropy(weighted.back().probs);
    }
  }
  if (empirical.empty()) fail_domain("uncertainty_report: no clustered samples");

  r.edse = shannon_entropy(aggregate(empirical).probs);
  const auto& headline_dists = mode == EntropyMode::Graybox ? weighted : empirical;
  if (mode == EntropyMode::Graybox) {
    r.ese = shannon_entropy(aggregate(weighted).probs);
    r.pe = predictive_entropy(clustered);
  }
  const Decomposition dec = decompose(headline_dists);
  r.mean_within = dec.mean_within;
  r.jsd = dec.jsd;
  r.normalized_u = normalized_uncertainty(r.headline(), r.cluster_count);
  return r;
}

void to_json(Json& j, const UncertaintyReport& r) {
  j = Json{{"problem_id", r.problem_id},
           {"dse_per_model", r.dse_per_model},
           {"edse", r.edse},
           {"mean_within", r.mean_within},
           {"jsd", r.jsd},
           {"normalized_u", r.normalized_u},
           {"cluster_count", r.cluster_count},
           {"method", to_string(r.method)}};
  if (r.pe) j["pe"] = *r.pe;
  if (r.ese) j["ese"] = *r.ese;
  if (!r.se_per_model.empty()) j["se_per_model"] = r.se_per_model;
}

void from_json(const Json& j, UncertaintyReport& r) {
  r.problem_id = j.value("problem_id", std::string());
  r.dse_per_model = j.at("dse_per_model").get<std::map<std::string, double>>();
  r.se_per_model = j.value("se_per_model", std::map<std::string, double>{});
  r.edse = j.at("edse").get<double>();
  r.mean_within = j.at("mean_within").get<double>();
  r.jsd = j.at("jsd").get<double>();
  r.normalized_u = j.at("normalized_u").get<double>();
  r.cluster_count = j.at("cluster_count").get<std::size_t>();
  r.method = parse_entropy_mode(j.at("method").get<std::string>());
  r.pe = j.contains("pe") ? std::optional<double>(j["pe"].get<double>()) : std::nullopt;
  r.ese = j.contains("ese") ? std::optional<double>(j["ese"].get<double>()) : std::nullopt;
}

}  // namespace esekit

#include "flowsm/detector.hpp"

#include <cmath>
#include <set>
#include <stdexcept>

namespace flowsm {

Threshold compute_threshold(const std::vector<double>& train_scores, double delta) {
  if (train_scores.empty()) throw std::invalid_argument("compute_threshold: empty scores");
  double sum = 0.0;
  for (double s : train_scores) {
    if (!std::isfinite(s)) throw std::invalid_argument("compute_threshold: non-finite score");
    sum += s;
  }
  const double n = static_cast<double>(train_scores.size());
  Threshold t;
  t.n = train_scores.size();
  t.delta = delta;
  t.mu = sum / n;
  double ss = 0.0;
  for (double s : train_scores) {
    double d = s - t.mu;
    ss += d * d;
  }
  t.sigma = std::sqrt(ss / n);  // population standard deviation
  t.value = t.mu + delta * t.sigma;
  return t;
}

std::vector<bool> flag_traces(const std::vector<TraceScore>& scores, const Threshold& threshold) {
  std::vector<bool> flags;
  flags.reserve(scores.size());
  for (const TraceScore& s : scores) flags.push_back(s.nll > threshold.value);
  return flags;
}

std::map<std::string, bool> label_hosts(const std::vector<TraceScore>& scores,
                                        const std::vector<bool>& flags,
                                        const std::vector<FlowRecord>& flows,
                                        const HostLabelParams& params) {
  if (scores.size() != flags.size()) {
    throw std::invalid_argument("label_hosts: scores/flags length mismatch");
  }

  struct ConnStats {
    std::size_t traces = 0;
    std::size_t flagged = 0;
  };
  std::map<ConnectionKey, ConnStats> conn_stats;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    ConnStats& cs = conn_stats[scores[i].connection];
    ++cs.traces;
    if (flags[i]) ++cs.flagged;
  }

  std::map<std::string, std::int64_t> host_flows;
  std::map<std::string, std::set<std::string>> host_conns;
  for (const FlowRecord& f : flows) {
    ++host_flows[f.src];
    host_conns[f.src].insert(f.dst);
  }

  std::map<std::string, bool> verdicts;
  for (const auto& [host, flow_count] : host_flows) {
    if (flow_count < params.min_flows) {
      verdicts[host] = false;  // not enough information: benign
      continue;
    }
    const auto& dsts = host_conns[host];
    std::size_t anomalous = 0;
    for (const std::string& dst : dsts) {
      auto it = conn_stats.find(ConnectionKey{host, dst});
      if (it == conn_stats.end()) continue;  // produced no traces: benign connection
      const ConnStats& cs = it->second;
      bool bad = params.majority ? cs.flagged * 2 > cs.traces : cs.flagged >= 1;
      if (bad) ++anomalous;
    }
    double frac = dsts.empty() ? 0.0 : static_cast<double>(anomalous) / static_cast<double>(dsts.size());
    verdicts[host] = frac >= params.frac;
  }
  return verdicts;
}

double f1_score(double precision, double recall) {
  if (precision + recall <= 0.0) return 0.0;
  return 2.0 * precision * recall / (precision + recall);
}

EvalReport compute_metrics(const std::vector<bool>& predicted, const std::vector<bool>& actual) {
  if (predicted.size() != actual.size()) {
    throw std::invalid_argument("compute_metrics: length mismatch");
  }
  EvalReport r;
  for (std::size_t i = 0; i < predicted.size(); ++i) {
    if (predicted[i] && actual[i]) ++r.tp;
    else if (predicted[i] && !actual[i]) ++r.fp;
    else if (!predicted[i] && actual[i]) ++r.fn;
    else ++r.tn;
  }
  const std::int64_t total = r.total();
  r.accuracy = total > 0 ? static_cast<double>(r.tp + r.tn) / static_cast<double>(total) : 0.0;
  if (r.tp + r.fp > 0) {
    r.precision = static_cast<double>(r.tp) / static_cast<double>(r.tp + r.fp);
  } else {
    r.precision = 0.0;
    r.precision_defined = false;
  }
  if (r.tp + r.fn > 0) {
    r.recall = static_cast<double>(r.tp) / static_cast<double>(r.tp + r.fn);
  } else {
    r.recall = 0.0;
    r.recall_defined = false;
  }
  if (r.precision + r.recall > 0.0) {
    r.f1 = f1_score(r.precision, r.recall);
  } else {
    r.f1 = 0.0;
    r.f1_defined = false;
  }
  return r;
}

nlohmann::ordered_json Threshold::to_json() const {
  nlohmann::ordered_json j;
  j["mu"] = mu;
  j["sigma"] = sigma;
  j["delta"] = delta;
  j["value"] = value;
  j["n"] = n;
  return j;
}

Threshold Threshold::from_json(const nlohmann::json& j) {
  Threshold t;
  t.mu = j.at("mu").get<double>();
  t.sigma = j.at("sigma").get<double>();
  t.delta = j.at("delta").get<double>();
  t.value = j.at("value").get<double>();
  t.n = j.at("n").get<std::size_t>();
  return t;
}

nlohmann::ordered_json EvalReport::to_json() const {
  nlohmann::ordered_json j;
  j["tp"] = tp;
  j["fp"] = fp;
  j["tn"] = tn;
  j["fn"] = fn;
  j["accuracy"] = accuracy;
  j["precision"] = precision;
  j["recall"] = recall;
  j["f1"] = f1;
  j["precision_defined"] = precision_defined;
  j["recall_defined"] = recall_defined;
  j["f1_defined"] = f1_defined;
  return j;
}

}  // namespace flowsm

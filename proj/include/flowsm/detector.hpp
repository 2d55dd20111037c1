#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "flowsm/automaton.hpp"
#include "flowsm/flow.hpp"

namespace flowsm {

/// threshold value = mu + delta * sigma over the training scores,
/// sigma being the population standard deviation (divide by N).
struct Threshold {
  double mu = 0.0;
  double sigma = 0.0;
  double delta = 0.0;
  double value = 0.0;
  std::size_t n = 0;

  nlohmann::ordered_json to_json() const;
  static Threshold from_json(const nlohmann::json& j);
};

/// Throws std::invalid_argument on empty or non-finite scores.
Threshold compute_threshold(const std::vector<double>& train_scores, double delta);

/// Anomaly iff nll is strictly greater than the threshold value.
std::vector<bool> flag_traces(const std::vector<TraceScore>& scores, const Threshold& threshold);

struct HostLabelParams {
  std::int64_t min_flows = 1000;
  double frac = 0.25;
  bool majority = false;  // false: a connection is anomalous when >=1 trace is flagged
};

/// Host-level labelling: a source host is malicious iff it produced at
/// least min_flows flows and at least `frac` of its connections are
/// anomalous. Hosts below min_flows are benign regardless.
std::map<std::string, bool> label_hosts(const std::vector<TraceScore>& scores,
                                        const std::vector<bool>& flags,
                                        const std::vector<FlowRecord>& flows,
                                        const HostLabelParams& params = {});

struct EvalReport {
  std::int64_t tp = 0, fp = 0, tn = 0, fn = 0;
  double accuracy = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  // false when the corresponding denominator was zero and the metric was
  // reported as 0 by convention
  bool precision_defined = true;
  bool recall_defined = true;
  bool f1_defined = true;

  std::int64_t total() const { return tp + fp + tn + fn; }
  nlohmann::ordered_json to_json() const;
};

double f1_score(double precision, double recall);

/// Standard confusion-matrix metrics; positive class = anomaly/malicious.
/// Throws std::invalid_argument on length mismatch.
EvalReport compute_metrics(const std::vector<bool>& predicted, const std::vector<bool>& actual);

}  // namespace flowsm

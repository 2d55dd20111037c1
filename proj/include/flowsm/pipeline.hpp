#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "flowsm/automaton.hpp"
#include "flowsm/detector.hpp"
#include "flowsm/encoding.hpp"
#include "flowsm/flow.hpp"
#include "flowsm/trace.hpp"

namespace flowsm {

/// Every knob of the encode/train/score/eval pipeline. Embedded verbatim in
/// every artifact file for auditability.
struct PipelineConfig {
  EncodingKind kind = EncodingKind::contextual;
  int k = 25;
  int window = 10;
  int stride = 1;
  double alpha = 0.05;
  std::int64_t min_count = 10;
  double epsilon = 0.5;
  double delta = 3.0;
  std::uint64_t seed = 1;
  bool transductive = true;          // fit encodings on train + test concatenated
  std::string transform = "log1p";   // contextual vector transform
  std::int64_t freq_cutoff = 1000;   // frequency encoding unique-code cutoff
  double split_fraction = 0.5;       // time-based train/test split point
  std::int64_t host_min_flows = 1000;
  double host_frac = 0.25;
  std::string host_conn_rule = "any";  // any | majority

  nlohmann::ordered_json to_json() const;
  static PipelineConfig from_json(const nlohmann::json& j);
  void validate() const;  // throws ConfigError on out-of-range values
};

/// '#'-prefixed first line carrying tool version and the config snapshot;
/// written at the top of every emitted CSV/SVG.
std::string artifact_preamble(const PipelineConfig& config);
std::optional<PipelineConfig> read_preamble_config(const std::string& path);

struct SplitResult {
  std::vector<FlowRecord> train;  // benign flows before the cutoff
  std::vector<FlowRecord> test;   // all flows at or after the cutoff
  std::size_t dropped_from_train = 0;  // malicious/unknown rows inside the train window
  std::int64_t cutoff_ts = 0;
};

SplitResult split_train_test(const std::vector<FlowRecord>& flows, double fraction);

/// Fitted protocol codec plus the two feature tables, serialized together.
struct EncodingBundle {
  PipelineConfig config;
  ProtocolCodec codec;
  EncodingTable bytes_table;
  EncodingTable duration_table;

  nlohmann::ordered_json to_json() const;
  static EncodingBundle from_json(const nlohmann::json& j);
  static EncodingBundle load(const std::string& path);
  void save(const std::string& path) const;
};

EncodedFlow encode_flow(const FlowRecord& flow, EncodingBundle& bundle);
std::vector<EncodedFlow> encode_flows(const std::vector<FlowRecord>& flows,
                                      EncodingBundle& bundle);

/// Fits the three encodings' tables. In transductive mode the tables are fit
/// on train and test concatenated (the evaluation-time procedure); otherwise
/// on the fitting set alone.
EncodingBundle fit_encodings(const PipelineConfig& config, const std::vector<FlowRecord>& train,
                             const std::vector<FlowRecord>& test);

void write_encoded_csv(const std::string& path, const std::vector<EncodedFlow>& flows,
                       const PipelineConfig& config);
std::vector<EncodedFlow> read_encoded_csv(const std::string& path);

struct TrainResult {
  Automaton automaton;
  std::size_t fpta_states = 0;
  std::vector<Trace> traces;
  std::vector<TraceScore> train_scores;
  Threshold threshold;
};

/// FPTA -> merge -> finalize over the benign traces, then scores the
/// training traces and derives the threshold. Throws DataError when the
/// input contains a malicious-labelled flow.
TrainResult run_train(const PipelineConfig& config, const std::vector<EncodedFlow>& train_flows);

struct ScoreResult {
  std::vector<Trace> traces;
  std::vector<TraceScore> scores;
  std::vector<bool> flags;
  double flagged_fraction = 0.0;
};

ScoreResult run_score(const PipelineConfig& config, const Automaton& automaton,
                      const Threshold& threshold, const std::vector<EncodedFlow>& test_flows);

void write_scores_csv(const std::string& path, const std::vector<TraceScore>& scores,
                      const std::vector<bool>& flags, const PipelineConfig& config);

struct ScoreRow {
  ConnectionKey connection;
  std::size_t start_index = 0;
  double nll = 0.0;
  bool flag = false;
  std::optional<bool> malicious;  // nullopt = unlabeled row
};
std::vector<ScoreRow> read_scores_csv(const std::string& path);

struct EvalResult {
  EvalReport report;
  std::size_t excluded_unlabeled = 0;
};

EvalResult evaluate_scores(const std::vector<ScoreRow>& rows);

/// Plot data + SVG (index vs nll; one polyline per class, benign blue,
/// malicious red).
void write_plot_csv(const std::string& path, const std::vector<ScoreRow>& rows,
                    const PipelineConfig& config);
void write_plot_svg(const std::string& path, const std::vector<ScoreRow>& rows,
                    const PipelineConfig& config);

std::string format_report_table(const std::vector<std::pair<std::string, EvalReport>>& rows);

struct CompareRow {
  EncodingKind kind = EncodingKind::contextual;
  double best_delta = 0.0;
  EvalReport report;
};

struct CompareResult {
  std::vector<CompareRow> rows;  // contextual, percentile, frequency
  nlohmann::ordered_json to_json(const PipelineConfig& config) const;
};

/// Full pipeline per encoding kind with shared seed and parameters; the
/// delta sweep (1, 2, 3) keeps the best F1 per kind.
CompareResult run_compare(const PipelineConfig& config, const std::vector<FlowRecord>& flows,
                          const std::vector<double>& delta_sweep = {1.0, 2.0, 3.0});

}  // namespace flowsm

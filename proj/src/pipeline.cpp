#include "flowsm/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <limits>
#include <sstream>

#include "flowsm/errors.hpp"
#include "flowsm/version.hpp"

namespace flowsm {

namespace {

std::string fmt_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::vector<std::string> split_line(const std::string& line, char delim) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    std::size_t pos = line.find(delim, start);
    if (pos == std::string::npos) {
      out.push_back(line.substr(start));
      break;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
  return out;
}

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write file: " + path);
  return out;
}

}  // namespace

nlohmann::ordered_json PipelineConfig::to_json() const {
  nlohmann::ordered_json j;
  j["kind"] = encoding_kind_name(kind);
  j["k"] = k;
  j["window"] = window;
  j["stride"] = stride;
  j["alpha"] = alpha;
  j["min_count"] = min_count;
  j["epsilon"] = epsilon;
  j["delta"] = delta;
  j["seed"] = seed;
  j["transductive"] = transductive;
  j["transform"] = transform;
  j["freq_cutoff"] = freq_cutoff;
  j["split_fraction"] = split_fraction;
  j["host_min_flows"] = host_min_flows;
  j["host_frac"] = host_frac;
  j["host_conn_rule"] = host_conn_rule;
  return j;
}

PipelineConfig PipelineConfig::from_json(const nlohmann::json& j) {
  PipelineConfig c;
  c.kind = encoding_kind_from_string(j.at("kind").get<std::string>());
  c.k = j.at("k").get<int>();
  c.window = j.at("window").get<int>();
  c.stride = j.at("stride").get<int>();
  c.alpha = j.at("alpha").get<double>();
  c.min_count = j.at("min_count").get<std::int64_t>();
  c.epsilon = j.at("epsilon").get<double>();
  c.delta = j.at("delta").get<double>();
  c.seed = j.at("seed").get<std::uint64_t>();
  c.transductive = j.at("transductive").get<bool>();
  c.transform = j.at("transform").get<std::string>();
  c.freq_cutoff = j.at("freq_cutoff").get<std::int64_t>();
  c.split_fraction = j.at("split_fraction").get<double>();
  c.host_min_flows = j.at("host_min_flows").get<std::int64_t>();
  c.host_frac = j.at("host_frac").get<double>();
  c.host_conn_rule = j.at("host_conn_rule").get<std::string>();
  return c;
}

void PipelineConfig::validate() const {
  if (k < 2) throw ConfigError("k must be >= 2");
  if (window < 2) throw ConfigError("window must be >= 2");
  if (stride < 1) throw ConfigError("stride must be >= 1");
  if (!(alpha > 0.0 && alpha < 1.0)) throw ConfigError("alpha must be in (0,1)");
  if (min_count < 0) throw ConfigError("min_count must be >= 0");
  if (epsilon < 0.0) throw ConfigError("epsilon must be >= 0");
  if (!(split_fraction > 0.0 && split_fraction < 1.0)) {
    throw ConfigError("split_fraction must be in (0,1)");
  }
  if (transform != "log1p" && transform != "raw") throw ConfigError("transform must be log1p|raw");
  if (freq_cutoff < 0) throw ConfigError("freq_cutoff must be >= 0");
  if (host_min_flows < 0) throw ConfigError("host_min_flows must be >= 0");
  if (!(host_frac >= 0.0 && host_frac <= 1.0)) throw ConfigError("host_frac must be in [0,1]");
  if (host_conn_rule != "any" && host_conn_rule != "majority") {
    throw ConfigError("host_conn_rule must be any|majority");
  }
}

std::string artifact_preamble(const PipelineConfig& config) {
  return std::string("# ") + kToolName + " " + kToolVersion +
         " config=" + config.to_json().dump() + "\n";
}

std::optional<PipelineConfig> read_preamble_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) return std::nullopt;
  std::string line;
  if (!std::getline(in, line)) return std::nullopt;
  std::size_t pos = line.find("config=");
  if (line.empty() || line[0] != '#' || pos == std::string::npos) return std::nullopt;
  try {
    return PipelineConfig::from_json(nlohmann::json::parse(line.substr(pos + 7)));
  } catch (...) {
    return std::nullopt;
  }
}

SplitResult split_train_test(const std::vector<FlowRecord>& flows, double fraction) {
  if (flows.empty()) throw DataError("cannot split an empty flow set");
  std::int64_t lo = std::numeric_limits<std::int64_t>::max();
  std::int64_t hi = std::numeric_limits<std::int64_t>::min();
  for (const FlowRecord& f : flows) {
    lo = std::min(lo, f.timestamp);
    hi = std::max(hi, f.timestamp);
  }
  SplitResult r;
  r.cutoff_ts = lo + static_cast<std::int64_t>(fraction * static_cast<double>(hi - lo));
  for (const FlowRecord& f : flows) {
    if (f.timestamp < r.cutoff_ts) {
      if (f.label == Label::benign) {
        r.train.push_back(f);
      } else {
        ++r.dropped_from_train;  // training input must stay purely benign
      }
    } else {
      r.test.push_back(f);
    }
  }
  return r;
}

nlohmann::ordered_json EncodingBundle::to_json() const {
  nlohmann::ordered_json j;
  j["format_version"] = 1;
  j["tool"] = {{"name", kToolName}, {"version", kToolVersion}};
  j["config"] = config.to_json();
  j["protocol_codec"] = codec.to_json();
  j["bytes"] = bytes_table.to_json();
  j["duration_ms"] = duration_table.to_json();
  return j;
}

EncodingBundle EncodingBundle::from_json(const nlohmann::json& j) {
  EncodingBundle b;
  b.config = PipelineConfig::from_json(j.at("config"));
  b.codec = ProtocolCodec::from_json(j.at("protocol_codec"));
  b.bytes_table = EncodingTable::from_json(j.at("bytes"));
  b.duration_table = EncodingTable::from_json(j.at("duration_ms"));
  return b;
}

EncodingBundle EncodingBundle::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open encoding bundle: " + path);
  nlohmann::json j;
  try {
    in >> j;
    return from_json(j);
  } catch (const nlohmann::json::exception& e) {
    throw DataError("bad encoding bundle " + path + ": " + e.what());
  }
}

void EncodingBundle::save(const std::string& path) const {
  auto out = open_out(path);
  out << to_json().dump(2) << '\n';
}

EncodingBundle fit_encodings(const PipelineConfig& config, const std::vector<FlowRecord>& train,
                             const std::vector<FlowRecord>& test) {
  std::vector<FlowRecord> fit_set = train;
  if (config.transductive) fit_set.insert(fit_set.end(), test.begin(), test.end());
  if (fit_set.empty()) throw DataError("no flows to fit encodings on");

  EncodingBundle bundle;
  bundle.config = config;
  bundle.codec = ProtocolCodec::fit(fit_set);

  auto fit_one = [&](FlowFeature feature) {
    switch (config.kind) {
      case EncodingKind::contextual: {
        ConnectionMap grouped = group_by_connection(fit_set);
        return fit_contextual_encoding(feature, grouped, config.k, config.seed, config.transform);
      }
      case EncodingKind::percentile: {
        std::vector<std::int64_t> values;
        values.reserve(fit_set.size());
        for (const FlowRecord& f : fit_set) values.push_back(feature_value(f, feature));
        return fit_percentile_encoding(feature, values);
      }
      default: {
        std::vector<std::int64_t> values;
        values.reserve(fit_set.size());
        for (const FlowRecord& f : fit_set) values.push_back(feature_value(f, feature));
        return fit_frequency_encoding(feature, values, config.freq_cutoff);
      }
    }
  };
  bundle.bytes_table = fit_one(FlowFeature::bytes);
  bundle.duration_table = fit_one(FlowFeature::duration_ms);
  return bundle;
}

EncodedFlow encode_flow(const FlowRecord& flow, EncodingBundle& bundle) {
  EncodedFlow e;
  e.flow = flow;
  e.proto_code = bundle.codec.intern(flow.protocol);
  e.bytes_code = bundle.bytes_table.encode(flow.bytes);
  e.duration_code = bundle.duration_table.encode(flow.duration_ms);
  return e;
}

std::vector<EncodedFlow> encode_flows(const std::vector<FlowRecord>& flows,
                                      EncodingBundle& bundle) {
  std::vector<EncodedFlow> out;
  out.reserve(flows.size());
  for (const FlowRecord& f : flows) out.push_back(encode_flow(f, bundle));
  return out;
}

void write_encoded_csv(const std::string& path, const std::vector<EncodedFlow>& flows,
                       const PipelineConfig& config) {
  auto out = open_out(path);
  out << artifact_preamble(config);
  out << "timestamp,duration_ms,protocol,src,dst,bytes,label,proto_code,bytes_code,duration_code\n";
  for (const EncodedFlow& e : flows) {
    const FlowRecord& f = e.flow;
    out << f.timestamp << ',' << f.duration_ms << ',' << f.protocol << ',' << f.src << ','
        << f.dst << ',' << f.bytes << ',' << label_to_string(f.label) << ',' << e.proto_code
        << ',' << e.bytes_code << ',' << e.duration_code << '\n';
  }
}

std::vector<EncodedFlow> read_encoded_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open encoded flow file: " + path);
  std::vector<EncodedFlow> flows;
  std::string line;
  bool header_seen = false;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    if (!header_seen) {
      header_seen = true;
      continue;
    }
    std::vector<std::string> f = split_line(line, ',');
    if (f.size() != 10) {
      throw DataError("bad encoded row at line " + std::to_string(line_no) + ": " + line);
    }
    try {
      EncodedFlow e;
      e.flow.timestamp = std::stoll(f[0]);
      e.flow.duration_ms = std::stoll(f[1]);
      e.flow.protocol = f[2];
      e.flow.src = f[3];
      e.flow.dst = f[4];
      e.flow.bytes = std::stoll(f[5]);
      e.flow.label = label_from_string(f[6]);
      e.proto_code = std::stoi(f[7]);
      e.bytes_code = std::stoi(f[8]);
      e.duration_code = std::stoi(f[9]);
      flows.push_back(std::move(e));
    } catch (const DataError&) {
      throw;
    } catch (...) {
      throw DataError("bad encoded row at line " + std::to_string(line_no) + ": " + line);
    }
  }
  return flows;
}

TrainResult run_train(const PipelineConfig& config, const std::vector<EncodedFlow>& train_flows) {
  std::size_t unknown = 0;
  for (const EncodedFlow& e : train_flows) {
    if (e.flow.label == Label::malicious) {
      throw DataError("training input contains a malicious-labelled flow (" + e.flow.src + " -> " +
                      e.flow.dst + " at ts " + std::to_string(e.flow.timestamp) +
                      "); training is benign-only");
    }
    if (e.flow.label == Label::unknown) ++unknown;
  }
  if (unknown > 0) {
    std::cerr << "warning: " << unknown << " unlabeled flows in training input, treated as benign\n";
  }

  TrainResult result;
  result.traces = build_traces(group_encoded(train_flows), config.window, config.stride);
  if (result.traces.empty()) {
    throw DataError("no training traces: every connection is shorter than the window (w=" +
                    std::to_string(config.window) + ")");
  }
  CountGraph fpta = build_fpta(result.traces);
  result.fpta_states = fpta.states.size();
  CountGraph merged = merge_states(fpta, config.alpha, config.min_count);
  result.automaton = finalize(merged, config.epsilon);
  result.train_scores = score_traces(result.automaton, result.traces);

  std::vector<double> nlls;
  nlls.reserve(result.train_scores.size());
  for (const TraceScore& s : result.train_scores) nlls.push_back(s.nll);
  result.threshold = compute_threshold(nlls, config.delta);
  return result;
}

ScoreResult run_score(const PipelineConfig& config, const Automaton& automaton,
                      const Threshold& threshold, const std::vector<EncodedFlow>& test_flows) {
  ScoreResult result;
  result.traces = build_traces(group_encoded(test_flows), config.window, config.stride);
  if (result.traces.empty()) {
    std::cerr << "warning: no test traces (all connections shorter than w="
              << config.window << "); emitting an empty score set\n";
    return result;
  }
  result.scores = score_traces(automaton, result.traces);
  result.flags = flag_traces(result.scores, threshold);
  std::size_t flagged = 0;
  for (bool f : result.flags) flagged += f ? 1 : 0;
  result.flagged_fraction = static_cast<double>(flagged) / static_cast<double>(result.flags.size());
  return result;
}

void write_scores_csv(const std::string& path, const std::vector<TraceScore>& scores,
                      const std::vector<bool>& flags, const PipelineConfig& config) {
  auto out = open_out(path);
  out << artifact_preamble(config);
  out << "connection,start_index,nll,flag,label\n";
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const TraceScore& s = scores[i];
    out << s.connection.src << '>' << s.connection.dst << ',' << s.start_index << ','
        << fmt_double(s.nll) << ',' << (flags[i] ? 1 : 0) << ',' << (s.malicious ? 1 : 0) << '\n';
  }
}

std::vector<ScoreRow> read_scores_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open score file: " + path);
  std::vector<ScoreRow> rows;
  std::string line;
  bool header_seen = false;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    if (!header_seen) {
      header_seen = true;
      continue;
    }
    std::vector<std::string> f = split_line(line, ',');
    if (f.size() != 5) throw DataError("bad score row at line " + std::to_string(line_no));
    ScoreRow r;
    std::size_t arrow = f[0].find('>');
    if (arrow == std::string::npos) {
      throw DataError("bad connection key at line " + std::to_string(line_no));
    }
    r.connection.src = f[0].substr(0, arrow);
    r.connection.dst = f[0].substr(arrow + 1);
    try {
      r.start_index = std::stoull(f[1]);
      r.nll = std::stod(f[2]);
      r.flag = f[3] == "1";
      if (f[4].empty()) {
        r.malicious = std::nullopt;
      } else if (f[4] == "0" || f[4] == "1") {
        r.malicious = f[4] == "1";
      } else {
        r.malicious = std::nullopt;
      }
    } catch (...) {
      throw DataError("bad score row at line " + std::to_string(line_no));
    }
    rows.push_back(std::move(r));
  }
  return rows;
}

EvalResult evaluate_scores(const std::vector<ScoreRow>& rows) {
  EvalResult result;
  std::vector<bool> predicted;
  std::vector<bool> actual;
  for (const ScoreRow& r : rows) {
    if (!r.malicious.has_value()) {
      ++result.excluded_unlabeled;
      continue;
    }
    predicted.push_back(r.flag);
    actual.push_back(*r.malicious);
  }
  result.report = compute_metrics(predicted, actual);
  return result;
}

void write_plot_csv(const std::string& path, const std::vector<ScoreRow>& rows,
                    const PipelineConfig& config) {
  auto out = open_out(path);
  out << artifact_preamble(config);
  out << "index,nll,label\n";
  for (std::size_t i = 0; i < rows.size(); ++i) {
    out << i << ',' << fmt_double(rows[i].nll) << ','
        << (rows[i].malicious.has_value() ? (*rows[i].malicious ? "1" : "0") : "") << '\n';
  }
}

void write_plot_svg(const std::string& path, const std::vector<ScoreRow>& rows,
                    const PipelineConfig& config) {
  constexpr double kWidth = 960.0, kHeight = 320.0, kMargin = 40.0;

  double max_nll = 1.0;
  for (const ScoreRow& r : rows) max_nll = std::max(max_nll, r.nll);
  const double n = rows.size() > 1 ? static_cast<double>(rows.size() - 1) : 1.0;

  auto x_of = [&](std::size_t i) {
    return kMargin + (kWidth - 2 * kMargin) * static_cast<double>(i) / n;
  };
  auto y_of = [&](double nll) {
    return kHeight - kMargin - (kHeight - 2 * kMargin) * (nll / max_nll);
  };

  // one polyline per class: benign blue, malicious red
  auto polyline_for = [&](bool malicious) {
    std::ostringstream pts;
    bool any = false;
    for (std::size_t i = 0; i < rows.size(); ++i) {
      if (!rows[i].malicious.has_value() || *rows[i].malicious != malicious) continue;
      pts << fmt_double(x_of(i)) << ',' << fmt_double(y_of(rows[i].nll)) << ' ';
      any = true;
    }
    return any ? pts.str() : std::string{};
  };

  auto out = open_out(path);
  out << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  out << "<!-- " << kToolName << " " << kToolVersion << " config=" << config.to_json().dump()
      << " -->\n";
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\""
      << kHeight << "\" viewBox=\"0 0 " << kWidth << " " << kHeight << "\">\n";
  out << "  <line x1=\"" << kMargin << "\" y1=\"" << kHeight - kMargin << "\" x2=\""
      << kWidth - kMargin << "\" y2=\"" << kHeight - kMargin
      << "\" stroke=\"#333333\" stroke-width=\"1\"/>\n";
  out << "  <line x1=\"" << kMargin << "\" y1=\"" << kMargin << "\" x2=\"" << kMargin
      << "\" y2=\"" << kHeight - kMargin << "\" stroke=\"#333333\" stroke-width=\"1\"/>\n";
  out << "  <text x=\"" << kWidth / 2 << "\" y=\"" << kHeight - 8
      << "\" font-size=\"12\" text-anchor=\"middle\">trace index</text>\n";
  out << "  <text x=\"14\" y=\"" << kHeight / 2
      << "\" font-size=\"12\" text-anchor=\"middle\" transform=\"rotate(-90 14 "
      << kHeight / 2 << ")\">nll</text>\n";
  std::string benign_pts = polyline_for(false);
  std::string malicious_pts = polyline_for(true);
  if (!benign_pts.empty()) {
    out << "  <polyline fill=\"none\" stroke=\"#1f77b4\" stroke-width=\"1\" points=\""
        << benign_pts << "\"/>\n";
  }
  if (!malicious_pts.empty()) {
    out << "  <polyline fill=\"none\" stroke=\"#d62728\" stroke-width=\"1\" points=\""
        << malicious_pts << "\"/>\n";
  }
  out << "</svg>\n";
}

std::string format_report_table(const std::vector<std::pair<std::string, EvalReport>>& rows) {
  std::ostringstream out;
  char buf[160];
  std::snprintf(buf, sizeof(buf), "%-22s %9s %7s %7s %7s\n", "Method", "Accuracy", "F1", "Prec.",
                "Rec.");
  out << buf;
  for (const auto& [name, r] : rows) {
    std::snprintf(buf, sizeof(buf), "%-22s %9.3f %7.3f %7.3f %7.3f\n", name.c_str(), r.accuracy,
                  r.f1, r.precision, r.recall);
    out << buf;
  }
  return out.str();
}

nlohmann::ordered_json CompareResult::to_json(const PipelineConfig& config) const {
  nlohmann::ordered_json j;
  j["format_version"] = 1;
  j["tool"] = {{"name", kToolName}, {"version", kToolVersion}};
  j["config"] = config.to_json();
  nlohmann::ordered_json rows_json = nlohmann::ordered_json::array();
  for (const CompareRow& row : rows) {
    nlohmann::ordered_json rj;
    rj["encoding"] = encoding_kind_name(row.kind);
    rj["best_delta"] = row.best_delta;
    rj["metrics"] = row.report.to_json();
    rows_json.push_back(std::move(rj));
  }
  j["rows"] = std::move(rows_json);
  return j;
}

CompareResult run_compare(const PipelineConfig& config, const std::vector<FlowRecord>& flows,
                          const std::vector<double>& delta_sweep) {
  if (delta_sweep.empty()) throw ConfigError("compare needs a non-empty delta sweep");
  SplitResult split = split_train_test(flows, config.split_fraction);
  if (split.dropped_from_train > 0) {
    std::cerr << "warning: dropped " << split.dropped_from_train
              << " non-benign flows from the training window\n";
  }

  CompareResult result;
  for (EncodingKind kind :
       {EncodingKind::contextual, EncodingKind::percentile, EncodingKind::frequency}) {
    PipelineConfig kc = config;
    kc.kind = kind;
    EncodingBundle bundle = fit_encodings(kc, split.train, split.test);
    std::vector<EncodedFlow> train_encoded = encode_flows(split.train, bundle);
    std::vector<EncodedFlow> test_encoded = encode_flows(split.test, bundle);

    TrainResult trained = run_train(kc, train_encoded);
    std::vector<Trace> test_traces = build_traces(group_encoded(test_encoded), kc.window, kc.stride);
    std::vector<TraceScore> scores = score_traces(trained.automaton, test_traces);

    std::vector<double> train_nlls;
    train_nlls.reserve(trained.train_scores.size());
    for (const TraceScore& s : trained.train_scores) train_nlls.push_back(s.nll);

    CompareRow row;
    row.kind = kind;
    bool have = false;
    for (double delta : delta_sweep) {
      Threshold th = compute_threshold(train_nlls, delta);
      std::vector<bool> flags = flag_traces(scores, th);
      std::vector<bool> actual;
      actual.reserve(scores.size());
      for (const TraceScore& s : scores) actual.push_back(s.malicious);
      EvalReport report = compute_metrics(flags, actual);
      if (!have || report.f1 > row.report.f1) {
        row.report = report;
        row.best_delta = delta;
        have = true;
      }
    }
    result.rows.push_back(std::move(row));
  }
  return result;
}

}  // namespace flowsm

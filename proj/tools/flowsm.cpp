#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

#include "flowsm/errors.hpp"
#include "flowsm/pipeline.hpp"
#include "flowsm/synth.hpp"
#include "flowsm/version.hpp"

namespace fs = std::filesystem;
using namespace flowsm;

namespace {

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write file: " + path);
  out << text;
}

void write_json(const std::string& path, const nlohmann::ordered_json& j) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write file: " + path);
  out << j.dump(2) << '\n';
}

nlohmann::json read_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open file: " + path);
  try {
    nlohmann::json j;
    in >> j;
    return j;
  } catch (const nlohmann::json::exception& e) {
    throw DataError("bad JSON in " + path + ": " + e.what());
  }
}

void ensure_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw DataError("cannot create output directory " + dir + ": " + ec.message());
}

std::vector<FlowRecord> load_flows(const std::string& path, const std::string& column_map_path,
                                   const std::vector<std::string>& overrides = {}) {
  ColumnMap map = column_map_path.empty() ? ColumnMap::canonical()
                                          : ColumnMap::from_config_file(column_map_path);
  for (const std::string& entry : overrides) map.apply_entry(entry);
  ParseResult parsed = parse_flows_file(path, map);
  if (parsed.skipped > 0) {
    std::cerr << "note: skipped " << parsed.skipped << "/" << parsed.total_rows
              << " rows of " << path << " (first bad row at line " << parsed.first_bad_line
              << ")\n";
  }
  return parsed.records;
}

// encode-time settings must match between artifacts produced by different runs
void check_encoding_config(const PipelineConfig& a, const PipelineConfig& b,
                           const std::string& what) {
  if (a.kind != b.kind || a.k != b.k || a.seed != b.seed || a.transform != b.transform ||
      a.freq_cutoff != b.freq_cutoff || a.transductive != b.transductive) {
    throw DataError("encoding configuration mismatch between " + what);
  }
}

struct CommonFlags {
  PipelineConfig config;
  std::string kind_name = "contextual";
};

void add_encoding_flags(CLI::App* cmd, CommonFlags& f) {
  cmd->add_option("--kind", f.kind_name, "encoding kind: contextual|percentile|frequency")
      ->check(CLI::IsMember({"contextual", "percentile", "frequency"}));
  cmd->add_option("--k", f.config.k, "cluster count for the contextual encoding");
  cmd->add_option("--seed", f.config.seed, "seed for every stochastic step");
  cmd->add_option("--transform", f.config.transform, "contextual vector transform: log1p|raw")
      ->check(CLI::IsMember({"log1p", "raw"}));
  cmd->add_option("--cutoff", f.config.freq_cutoff, "frequency encoding unique-code cutoff");
}

void add_model_flags(CLI::App* cmd, CommonFlags& f) {
  cmd->add_option("--w", f.config.window, "sliding window size");
  cmd->add_option("--stride", f.config.stride, "sliding window stride");
  cmd->add_option("--alpha", f.config.alpha, "Hoeffding test significance");
  cmd->add_option("--min-count", f.config.min_count, "promote-without-testing evidence floor");
  cmd->add_option("--epsilon", f.config.epsilon, "additive smoothing");
  cmd->add_option("--delta", f.config.delta, "threshold factor (mu + delta*sigma)");
}

int run(int argc, char** argv) {
  CLI::App app{std::string(kToolName) +
               ": contextual-frequency NetFlow encoding, state-machine learning and "
               "anomaly detection"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(kToolName) + " " + kToolVersion);

  // ---- synth ----
  auto* synth_cmd = app.add_subcommand("synth", "generate a synthetic labelled NetFlow CSV");
  std::string synth_spec, synth_out;
  std::optional<std::uint64_t> synth_seed;
  synth_cmd->add_option("--spec", synth_spec, "scenario spec JSON")->required();
  synth_cmd->add_option("--out", synth_out, "output CSV path")->required();
  synth_cmd->add_option("--seed", synth_seed, "override the spec's seed");

  // ---- encode ----
  auto* encode_cmd = app.add_subcommand("encode", "fit encoding tables and emit encoded flows");
  CommonFlags encode_flags;
  std::string encode_input, encode_test, encode_outdir = ".", encode_colmap;
  std::optional<double> encode_split;
  bool train_only = false;
  encode_cmd->add_option("--input", encode_input, "training flow CSV (or the full dataset with --split)")
      ->required();
  encode_cmd->add_option("--test", encode_test, "test flow CSV (enables transductive fitting)");
  encode_cmd->add_option("--split", encode_split,
                         "time-based split fraction applied to --input (train = benign flows "
                         "before the cutoff)");
  encode_cmd->add_option("--column-map", encode_colmap, "key=value column map file");
  std::vector<std::string> encode_cols;
  encode_cmd->add_option("--col", encode_cols,
                         "column map entry, e.g. --col timestamp=ts (repeatable)");
  encode_cmd->add_option("--out-dir", encode_outdir, "output directory");
  encode_cmd->add_flag("--train-only", train_only,
                       "fit tables on the training set only (no train+test concatenation)");
  add_encoding_flags(encode_cmd, encode_flags);

  // ---- train ----
  auto* train_cmd = app.add_subcommand("train", "learn an automaton from benign encoded flows");
  CommonFlags train_flags;
  std::string train_input, train_outdir = ".", train_dot, train_dump;
  train_cmd->add_option("--input", train_input, "encoded benign flow CSV")->required();
  train_cmd->add_option("--out-dir", train_outdir, "output directory");
  train_cmd->add_option("--dot", train_dot, "also write the automaton as Graphviz dot");
  train_cmd->add_option("--dump-traces", train_dump, "also write the training traces (Abbadingo-style)");
  add_model_flags(train_cmd, train_flags);

  // ---- score ----
  auto* score_cmd = app.add_subcommand("score", "score encoded test flows against an automaton");
  std::string score_input, score_automaton, score_threshold, score_out, score_dump;
  score_cmd->add_option("--input", score_input, "encoded test flow CSV")->required();
  score_cmd->add_option("--automaton", score_automaton, "automaton JSON from train")->required();
  score_cmd->add_option("--threshold", score_threshold, "threshold JSON from train")->required();
  score_cmd->add_option("--out", score_out, "per-trace score CSV")->required();
  score_cmd->add_option("--dump-traces", score_dump, "also write the test traces (Abbadingo-style)");

  // ---- eval ----
  auto* eval_cmd = app.add_subcommand("eval", "metrics and probability-series plots from a score CSV");
  std::string eval_scores, eval_outdir = ".", eval_flows;
  CommonFlags eval_flags;
  eval_cmd->add_option("--scores", eval_scores, "score CSV from score/train")->required();
  eval_cmd->add_option("--out-dir", eval_outdir, "output directory");
  eval_cmd->add_option("--flows", eval_flows,
                       "encoded flow CSV for host-level labelling (optional)");
  eval_cmd->add_option("--min-flows", eval_flags.config.host_min_flows,
                       "host rule: flows below this make a host benign");
  eval_cmd->add_option("--host-frac", eval_flags.config.host_frac,
                       "host rule: anomalous-connection fraction");
  eval_cmd->add_option("--host-conn-rule", eval_flags.config.host_conn_rule,
                       "connection anomaly rule: any|majority")
      ->check(CLI::IsMember({"any", "majority"}));

  // ---- compare ----
  auto* compare_cmd = app.add_subcommand(
      "compare", "run the pipeline for all three encodings and report the best-delta metrics");
  CommonFlags compare_flags;
  std::string compare_input, compare_outdir = ".", compare_colmap;
  compare_cmd->add_option("--input", compare_input, "labelled flow CSV")->required();
  compare_cmd->add_option("--column-map", compare_colmap, "key=value column map file");
  std::vector<std::string> compare_cols;
  compare_cmd->add_option("--col", compare_cols,
                          "column map entry, e.g. --col timestamp=ts (repeatable)");
  compare_cmd->add_option("--out-dir", compare_outdir, "output directory");
  compare_cmd->add_option("--split", compare_flags.config.split_fraction,
                          "time-based train/test split fraction");
  add_encoding_flags(compare_cmd, compare_flags);
  add_model_flags(compare_cmd, compare_flags);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  if (synth_cmd->parsed()) {
    ScenarioSpec spec = ScenarioSpec::load(synth_spec);
    if (synth_seed) spec.seed = *synth_seed;
    std::vector<FlowRecord> flows = generate(spec);
    std::string preamble = std::string("# ") + kToolName + " " + kToolVersion +
                           " scenario=" + spec.to_json().dump() + "\n";
    serialize_flows_file(synth_out, flows, preamble);
    std::cout << "wrote " << flows.size() << " flows to " << synth_out << "\n";
    return 0;
  }

  if (encode_cmd->parsed()) {
    PipelineConfig config = encode_flags.config;
    config.kind = encoding_kind_from_string(encode_flags.kind_name);
    config.transductive = !train_only;
    if (encode_split) config.split_fraction = *encode_split;
    config.validate();
    ensure_dir(encode_outdir);

    std::vector<FlowRecord> train = load_flows(encode_input, encode_colmap, encode_cols);
    std::vector<FlowRecord> test;
    if (!encode_test.empty() && encode_split) {
      throw ConfigError("--test and --split are mutually exclusive");
    }
    if (!encode_test.empty()) {
      test = load_flows(encode_test, encode_colmap, encode_cols);
    } else if (encode_split) {
      SplitResult split = split_train_test(train, config.split_fraction);
      if (split.dropped_from_train > 0) {
        std::cerr << "warning: dropped " << split.dropped_from_train
                  << " non-benign flows from the training window\n";
      }
      train = std::move(split.train);
      test = std::move(split.test);
    }

    EncodingBundle bundle = fit_encodings(config, train, test);
    bundle.save((fs::path(encode_outdir) / "encoding.json").string());
    if (test.empty()) {
      write_encoded_csv((fs::path(encode_outdir) / "encoded.csv").string(),
                        encode_flows(train, bundle), config);
    } else {
      write_encoded_csv((fs::path(encode_outdir) / "encoded_train.csv").string(),
                        encode_flows(train, bundle), config);
      write_encoded_csv((fs::path(encode_outdir) / "encoded_test.csv").string(),
                        encode_flows(test, bundle), config);
    }
    std::cout << "encoding tables (" << encode_flags.kind_name << ") written to " << encode_outdir
              << "\n";
    return 0;
  }

  if (train_cmd->parsed()) {
    PipelineConfig config = train_flags.config;
    if (auto embedded = read_preamble_config(train_input)) {
      PipelineConfig merged = *embedded;  // keep the encode-time snapshot
      merged.window = config.window;
      merged.stride = config.stride;
      merged.alpha = config.alpha;
      merged.min_count = config.min_count;
      merged.epsilon = config.epsilon;
      merged.delta = config.delta;
      config = merged;
    }
    config.validate();
    ensure_dir(train_outdir);

    std::vector<EncodedFlow> flows = read_encoded_csv(train_input);
    TrainResult result = run_train(config, flows);

    nlohmann::ordered_json aj;
    aj["format_version"] = 1;
    aj["tool"] = {{"name", kToolName}, {"version", kToolVersion}};
    aj["config"] = config.to_json();
    aj["fpta_states"] = result.fpta_states;
    aj["state_count"] = result.automaton.state_count();
    aj["automaton"] = result.automaton.to_json();
    write_json((fs::path(train_outdir) / "automaton.json").string(), aj);

    nlohmann::ordered_json tj;
    tj["format_version"] = 1;
    tj["tool"] = {{"name", kToolName}, {"version", kToolVersion}};
    tj["config"] = config.to_json();
    tj["threshold"] = result.threshold.to_json();
    write_json((fs::path(train_outdir) / "threshold.json").string(), tj);

    write_scores_csv((fs::path(train_outdir) / "train_scores.csv").string(), result.train_scores,
                     flag_traces(result.train_scores, result.threshold), config);

    if (!train_dot.empty()) write_text(train_dot, result.automaton.to_dot());
    if (!train_dump.empty()) {
      std::ofstream out(train_dump);
      if (!out) throw DataError("cannot write file: " + train_dump);
      write_trace_file(out, result.traces);
    }
    std::cout << "learned automaton: " << result.automaton.state_count() << " states (FPTA had "
              << result.fpta_states << "); threshold " << result.threshold.value << "\n";
    return 0;
  }

  if (score_cmd->parsed()) {
    nlohmann::json aj = read_json(score_automaton);
    PipelineConfig config = PipelineConfig::from_json(aj.at("config"));
    Automaton automaton = Automaton::from_json(aj.at("automaton"));
    nlohmann::json tj = read_json(score_threshold);
    Threshold threshold = Threshold::from_json(tj.at("threshold"));

    if (auto encoded_config = read_preamble_config(score_input)) {
      check_encoding_config(*encoded_config, config,
                            "the encoded test file and the automaton");
    }

    std::vector<EncodedFlow> flows = read_encoded_csv(score_input);
    ScoreResult result = run_score(config, automaton, threshold, flows);
    write_scores_csv(score_out, result.scores, result.flags, config);
    if (!score_dump.empty()) {
      std::ofstream out(score_dump);
      if (!out) throw DataError("cannot write file: " + score_dump);
      write_trace_file(out, result.traces);
    }
    std::size_t flagged = 0;
    for (bool f : result.flags) flagged += f ? 1 : 0;
    std::cout << "flagged " << flagged << "/" << result.scores.size() << " traces ("
              << result.flagged_fraction * 100.0 << "%)\n";
    return 0;
  }

  if (eval_cmd->parsed()) {
    PipelineConfig config = eval_flags.config;
    if (auto embedded = read_preamble_config(eval_scores)) {
      PipelineConfig merged = *embedded;
      merged.host_min_flows = config.host_min_flows;
      merged.host_frac = config.host_frac;
      merged.host_conn_rule = config.host_conn_rule;
      config = merged;
    }
    ensure_dir(eval_outdir);

    std::vector<ScoreRow> rows = read_scores_csv(eval_scores);
    EvalResult eval = evaluate_scores(rows);
    if (eval.excluded_unlabeled > 0) {
      std::cerr << "note: excluded " << eval.excluded_unlabeled << " unlabeled rows\n";
    }

    nlohmann::ordered_json rj;
    rj["format_version"] = 1;
    rj["tool"] = {{"name", kToolName}, {"version", kToolVersion}};
    rj["config"] = config.to_json();
    rj["excluded_unlabeled"] = eval.excluded_unlabeled;
    rj["metrics"] = eval.report.to_json();
    write_json((fs::path(eval_outdir) / "report.json").string(), rj);
    std::string table = format_report_table({{"state machine", eval.report}});
    write_text((fs::path(eval_outdir) / "report.txt").string(), table);
    write_plot_csv((fs::path(eval_outdir) / "plot.csv").string(), rows, config);
    write_plot_svg((fs::path(eval_outdir) / "plot.svg").string(), rows, config);

    if (!eval_flows.empty()) {
      std::vector<EncodedFlow> encoded = read_encoded_csv(eval_flows);
      std::vector<FlowRecord> flows;
      flows.reserve(encoded.size());
      for (const EncodedFlow& e : encoded) flows.push_back(e.flow);
      std::vector<TraceScore> scores;
      std::vector<bool> flags;
      scores.reserve(rows.size());
      for (const ScoreRow& r : rows) {
        TraceScore s;
        s.connection = r.connection;
        s.start_index = r.start_index;
        s.nll = r.nll;
        s.malicious = r.malicious.value_or(false);
        scores.push_back(std::move(s));
        flags.push_back(r.flag);
      }
      HostLabelParams params;
      params.min_flows = config.host_min_flows;
      params.frac = config.host_frac;
      params.majority = config.host_conn_rule == "majority";
      auto verdicts = label_hosts(scores, flags, flows, params);
      nlohmann::ordered_json hj;
      hj["config"] = config.to_json();
      nlohmann::ordered_json hosts = nlohmann::ordered_json::object();
      for (const auto& [host, bad] : verdicts) hosts[host] = bad ? "malicious" : "benign";
      hj["hosts"] = std::move(hosts);
      write_json((fs::path(eval_outdir) / "hosts.json").string(), hj);
    }

    std::cout << table;
    return 0;
  }

  if (compare_cmd->parsed()) {
    PipelineConfig config = compare_flags.config;
    config.kind = encoding_kind_from_string(compare_flags.kind_name);
    config.validate();
    ensure_dir(compare_outdir);

    std::vector<FlowRecord> flows = load_flows(compare_input, compare_colmap, compare_cols);
    CompareResult result = run_compare(config, flows);

    write_json((fs::path(compare_outdir) / "compare.json").string(), result.to_json(config));
    std::vector<std::pair<std::string, EvalReport>> table_rows;
    for (const CompareRow& row : result.rows) {
      table_rows.push_back({std::string(encoding_kind_name(row.kind)) + " (delta=" +
                                std::to_string(static_cast<int>(row.best_delta)) + ")",
                            row.report});
    }
    std::string table = format_report_table(table_rows);
    write_text((fs::path(compare_outdir) / "compare.txt").string(), table);
    std::cout << table;
    return 0;
  }

  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return 4;
  }
}

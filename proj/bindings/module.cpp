#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "flowsm/automaton.hpp"
#include "flowsm/detector.hpp"
#include "flowsm/encoding.hpp"
#include "flowsm/errors.hpp"
#include "flowsm/flow.hpp"
#include "flowsm/kmeans.hpp"
#include "flowsm/pipeline.hpp"
#include "flowsm/synth.hpp"
#include "flowsm/trace.hpp"
#include "flowsm/version.hpp"

namespace py = pybind11;
using namespace flowsm;

namespace {

std::vector<Trace> make_traces(const std::vector<EncodedFlow>& flows, int w, int stride) {
  return build_traces(group_encoded(flows), w, stride);
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Contextual-frequency NetFlow encoding, state-machine learning and anomaly detection";
  m.attr("__version__") = kToolVersion;

  py::register_exception<ConfigError>(m, "ConfigError");
  py::register_exception<DataError>(m, "DataError");

  py::enum_<Label>(m, "Label")
      .value("benign", Label::benign)
      .value("malicious", Label::malicious)
      .value("unknown", Label::unknown);

  py::enum_<EncodingKind>(m, "EncodingKind")
      .value("contextual", EncodingKind::contextual)
      .value("percentile", EncodingKind::percentile)
      .value("frequency", EncodingKind::frequency);

  py::class_<FlowRecord>(m, "FlowRecord")
      .def(py::init<>())
      .def_readwrite("timestamp", &FlowRecord::timestamp)
      .def_readwrite("duration_ms", &FlowRecord::duration_ms)
      .def_readwrite("protocol", &FlowRecord::protocol)
      .def_readwrite("src", &FlowRecord::src)
      .def_readwrite("dst", &FlowRecord::dst)
      .def_readwrite("bytes", &FlowRecord::bytes)
      .def_readwrite("label", &FlowRecord::label)
      .def("__repr__", [](const FlowRecord& f) {
        std::ostringstream out;
        out << "FlowRecord(ts=" << f.timestamp << ", " << f.src << "->" << f.dst << ", "
            << f.protocol << ", bytes=" << f.bytes << ", dur=" << f.duration_ms << ")";
        return out.str();
      });

  py::class_<ConnectionKey>(m, "ConnectionKey")
      .def(py::init<>())
      .def_readwrite("src", &ConnectionKey::src)
      .def_readwrite("dst", &ConnectionKey::dst)
      .def("__eq__", [](const ConnectionKey& a, const ConnectionKey& b) { return a == b; })
      .def("__hash__",
           [](const ConnectionKey& k) { return py::hash(py::make_tuple(k.src, k.dst)); })
      .def("__repr__",
           [](const ConnectionKey& k) { return "ConnectionKey(" + k.src + ">" + k.dst + ")"; });

  py::class_<EncodedFlow>(m, "EncodedFlow")
      .def(py::init<>())
      .def_readwrite("flow", &EncodedFlow::flow)
      .def_readwrite("proto_code", &EncodedFlow::proto_code)
      .def_readwrite("bytes_code", &EncodedFlow::bytes_code)
      .def_readwrite("duration_code", &EncodedFlow::duration_code);

  py::class_<Trace>(m, "Trace")
      .def(py::init<>())
      .def_readwrite("connection", &Trace::connection)
      .def_readwrite("start_index", &Trace::start_index)
      .def_readwrite("symbols", &Trace::symbols)
      .def_readwrite("malicious", &Trace::malicious);

  py::class_<TraceScore>(m, "TraceScore")
      .def_readonly("connection", &TraceScore::connection)
      .def_readonly("start_index", &TraceScore::start_index)
      .def_readonly("malicious", &TraceScore::malicious)
      .def_readonly("nll", &TraceScore::nll);

  // ---- flows ----
  m.def(
      "parse_flows",
      [](const std::string& path) {
        ParseResult r = parse_flows_file(path, ColumnMap::canonical());
        return py::make_tuple(r.records, r.skipped);
      },
      py::arg("path"), "Parse a canonical CSV; returns (records, skipped_rows).");
  m.def(
      "write_flows",
      [](const std::string& path, const std::vector<FlowRecord>& flows) {
        serialize_flows_file(path, flows);
      },
      py::arg("path"), py::arg("flows"));

  // ---- synth ----
  m.def(
      "generate_flows",
      [](const std::string& spec_path) { return generate(ScenarioSpec::load(spec_path)); },
      py::arg("spec_path"), "Generate labelled flows from a scenario spec JSON.");

  // ---- encoding ----
  m.def("compute_decile_edges", &compute_decile_edges, py::arg("values"));
  m.def("bin_index", &bin_index, py::arg("x"), py::arg("edges"));
  m.def("hoeffding_compatible", &hoeffding_compatible, py::arg("n1"), py::arg("f1"), py::arg("n2"),
        py::arg("f2"), py::arg("alpha"));

  py::class_<ClusteringResult>(m, "ClusteringResult")
      .def_readonly("centroids", &ClusteringResult::centroids)
      .def_readonly("assignments", &ClusteringResult::assignments)
      .def_readonly("inertia", &ClusteringResult::inertia)
      .def_readonly("iterations", &ClusteringResult::iterations)
      .def_readonly("inertia_history", &ClusteringResult::inertia_history);
  m.def("kmeans_fit", &kmeans_fit, py::arg("points"), py::arg("k"), py::arg("seed"),
        py::arg("max_iter") = 300, py::arg("tol") = 1e-6, py::arg("n_init") = 10);
  m.def(
      "nearest_centroid",
      [](const std::vector<double>& point, const std::vector<std::vector<double>>& centroids) {
        return nearest_centroid(point, centroids);
      },
      py::arg("point"), py::arg("centroids"));

  py::class_<EncodingTable>(m, "EncodingTable")
      .def_readonly("feature", &EncodingTable::feature)
      .def_readonly("kind", &EncodingTable::kind)
      .def_readonly("edges", &EncodingTable::edges)
      .def_readonly("codes", &EncodingTable::codes)
      .def_readonly("code_count", &EncodingTable::code_count)
      .def("encode", &EncodingTable::encode, py::arg("value"))
      .def("to_json", [](const EncodingTable& t) { return t.to_json().dump(); });

  py::class_<PipelineConfig>(m, "PipelineConfig")
      .def(py::init<>())
      .def_readwrite("kind", &PipelineConfig::kind)
      .def_readwrite("k", &PipelineConfig::k)
      .def_readwrite("window", &PipelineConfig::window)
      .def_readwrite("stride", &PipelineConfig::stride)
      .def_readwrite("alpha", &PipelineConfig::alpha)
      .def_readwrite("min_count", &PipelineConfig::min_count)
      .def_readwrite("epsilon", &PipelineConfig::epsilon)
      .def_readwrite("delta", &PipelineConfig::delta)
      .def_readwrite("seed", &PipelineConfig::seed)
      .def_readwrite("transductive", &PipelineConfig::transductive)
      .def_readwrite("transform", &PipelineConfig::transform)
      .def_readwrite("freq_cutoff", &PipelineConfig::freq_cutoff)
      .def_readwrite("split_fraction", &PipelineConfig::split_fraction);

  py::class_<EncodingBundle>(m, "EncodingBundle")
      .def_readonly("bytes_table", &EncodingBundle::bytes_table)
      .def_readonly("duration_table", &EncodingBundle::duration_table)
      .def("to_json", [](const EncodingBundle& b) { return b.to_json().dump(); })
      .def("save", &EncodingBundle::save, py::arg("path"));

  m.def("fit_encodings", &fit_encodings, py::arg("config"), py::arg("train"),
        py::arg("test") = std::vector<FlowRecord>{});
  m.def(
      "encode_flows",
      [](const std::vector<FlowRecord>& flows, EncodingBundle& bundle) {
        return encode_flows(flows, bundle);
      },
      py::arg("flows"), py::arg("bundle"));

  m.def(
      "split_train_test",
      [](const std::vector<FlowRecord>& flows, double fraction) {
        SplitResult r = split_train_test(flows, fraction);
        return py::make_tuple(r.train, r.test, r.dropped_from_train);
      },
      py::arg("flows"), py::arg("fraction"),
      "Time-based split; returns (train, test, dropped_from_train).");

  // ---- traces & automaton ----
  m.def("build_traces", &make_traces, py::arg("encoded_flows"), py::arg("w"),
        py::arg("stride") = 1);

  py::class_<Automaton>(m, "Automaton")
      .def_property_readonly("state_count", &Automaton::state_count)
      .def_readonly("alphabet", &Automaton::alphabet)
      .def_readonly("epsilon", &Automaton::epsilon)
      .def("to_json", [](const Automaton& a) { return a.to_json().dump(); })
      .def("to_dot", &Automaton::to_dot)
      .def_static("from_json", [](const std::string& text) {
        return Automaton::from_json(nlohmann::json::parse(text));
      });

  m.def("score_traces", &score_traces, py::arg("automaton"), py::arg("traces"));

  py::class_<Threshold>(m, "Threshold")
      .def(py::init<>())
      .def_readwrite("mu", &Threshold::mu)
      .def_readwrite("sigma", &Threshold::sigma)
      .def_readwrite("delta", &Threshold::delta)
      .def_readwrite("value", &Threshold::value);
  m.def("compute_threshold", &compute_threshold, py::arg("train_scores"), py::arg("delta"));
  m.def("flag_traces", &flag_traces, py::arg("scores"), py::arg("threshold"));

  py::class_<TrainResult>(m, "TrainResult")
      .def_readonly("automaton", &TrainResult::automaton)
      .def_readonly("fpta_states", &TrainResult::fpta_states)
      .def_readonly("traces", &TrainResult::traces)
      .def_readonly("train_scores", &TrainResult::train_scores)
      .def_readonly("threshold", &TrainResult::threshold);
  m.def("run_train", &run_train, py::arg("config"), py::arg("train_flows"));

  py::class_<ScoreResult>(m, "ScoreResult")
      .def_readonly("traces", &ScoreResult::traces)
      .def_readonly("scores", &ScoreResult::scores)
      .def_readonly("flags", &ScoreResult::flags)
      .def_readonly("flagged_fraction", &ScoreResult::flagged_fraction);
  m.def("run_score", &run_score, py::arg("config"), py::arg("automaton"), py::arg("threshold"),
        py::arg("test_flows"));

  // ---- detection & evaluation ----
  py::class_<EvalReport>(m, "EvalReport")
      .def_readonly("tp", &EvalReport::tp)
      .def_readonly("fp", &EvalReport::fp)
      .def_readonly("tn", &EvalReport::tn)
      .def_readonly("fn", &EvalReport::fn)
      .def_readonly("accuracy", &EvalReport::accuracy)
      .def_readonly("precision", &EvalReport::precision)
      .def_readonly("recall", &EvalReport::recall)
      .def_readonly("f1", &EvalReport::f1);
  m.def("compute_metrics", &compute_metrics, py::arg("predicted"), py::arg("actual"));
  m.def("f1_score", &f1_score, py::arg("precision"), py::arg("recall"));

  m.def(
      "label_hosts",
      [](const std::vector<TraceScore>& scores, const std::vector<bool>& flags,
         const std::vector<FlowRecord>& flows, std::int64_t min_flows, double frac) {
        HostLabelParams params;
        params.min_flows = min_flows;
        params.frac = frac;
        return label_hosts(scores, flags, flows, params);
      },
      py::arg("scores"), py::arg("flags"), py::arg("flows"), py::arg("min_flows") = 1000,
      py::arg("frac") = 0.25);

  py::class_<CompareRow>(m, "CompareRow")
      .def_readonly("kind", &CompareRow::kind)
      .def_readonly("best_delta", &CompareRow::best_delta)
      .def_readonly("report", &CompareRow::report);
  m.def(
      "run_compare",
      [](const PipelineConfig& config, const std::vector<FlowRecord>& flows) {
        return run_compare(config, flows).rows;
      },
      py::arg("config"), py::arg("flows"));
}

#include "flowsm/trace.hpp"

#include <algorithm>
#include <charconv>
#include <istream>
#include <ostream>
#include <set>
#include <sstream>
#include <stdexcept>

#include "flowsm/errors.hpp"

namespace flowsm {

ProtocolCodec ProtocolCodec::fit(const std::vector<FlowRecord>& flows) {
  ProtocolCodec codec;
  std::set<std::string> extra;
  for (const FlowRecord& f : flows) {
    if (!codec.codes.count(f.protocol)) extra.insert(f.protocol);
  }
  for (const std::string& token : extra) codec.codes[token] = codec.next_id++;
  return codec;
}

std::optional<int> ProtocolCodec::lookup(const std::string& token) const {
  auto it = codes.find(token);
  if (it == codes.end()) return std::nullopt;
  return it->second;
}

int ProtocolCodec::intern(const std::string& token) {
  auto it = codes.find(token);
  if (it != codes.end()) return it->second;
  int id = next_id++;
  codes[token] = id;
  return id;
}

nlohmann::ordered_json ProtocolCodec::to_json() const {
  nlohmann::ordered_json j;
  nlohmann::ordered_json entries = nlohmann::ordered_json::array();
  for (const auto& [token, id] : codes) entries.push_back({token, id});
  j["codes"] = std::move(entries);
  j["next_id"] = next_id;
  return j;
}

ProtocolCodec ProtocolCodec::from_json(const nlohmann::json& j) {
  ProtocolCodec codec;
  codec.codes.clear();
  for (const auto& pair : j.at("codes")) {
    codec.codes[pair.at(0).get<std::string>()] = pair.at(1).get<int>();
  }
  codec.next_id = j.at("next_id").get<int>();
  return codec;
}

Symbol make_symbol(int proto_code, int bytes_code, int duration_code) {
  return std::to_string(proto_code) + "_" + std::to_string(bytes_code) + "_" +
         std::to_string(duration_code);
}

std::optional<std::array<int, 3>> parse_symbol(const Symbol& s) {
  std::array<int, 3> out{};
  std::size_t start = 0;
  for (int part = 0; part < 3; ++part) {
    std::size_t end = part < 2 ? s.find('_', start) : s.size();
    if (end == std::string::npos) return std::nullopt;
    int value = 0;
    auto [ptr, ec] = std::from_chars(s.data() + start, s.data() + end, value);
    if (ec != std::errc() || ptr != s.data() + end || value < 0) return std::nullopt;
    out[static_cast<std::size_t>(part)] = value;
    start = end + 1;
  }
  return out;
}

Symbol symbolize(const FlowRecord& flow, ProtocolCodec& codec, const EncodingTable& bytes_table,
                 const EncodingTable& duration_table) {
  return make_symbol(codec.intern(flow.protocol), bytes_table.encode(flow.bytes),
                     duration_table.encode(flow.duration_ms));
}

std::map<ConnectionKey, std::vector<EncodedFlow>> group_encoded(
    const std::vector<EncodedFlow>& flows) {
  std::map<ConnectionKey, std::vector<EncodedFlow>> grouped;
  for (const EncodedFlow& f : flows) {
    grouped[ConnectionKey{f.flow.src, f.flow.dst}].push_back(f);
  }
  for (auto& [key, seq] : grouped) {
    std::stable_sort(seq.begin(), seq.end(), [](const EncodedFlow& a, const EncodedFlow& b) {
      return a.flow.timestamp < b.flow.timestamp;
    });
  }
  return grouped;
}

std::vector<Trace> build_traces(
    const std::map<ConnectionKey, std::vector<EncodedFlow>>& connections, int w, int stride) {
  if (w < 2) throw std::invalid_argument("build_traces: window size must be >= 2");
  if (stride < 1) throw std::invalid_argument("build_traces: stride must be >= 1");

  std::vector<Trace> traces;
  for (const auto& [key, seq] : connections) {
    const std::size_t n = seq.size();
    if (n < static_cast<std::size_t>(w)) continue;
    for (std::size_t start = 0; start + static_cast<std::size_t>(w) <= n;
         start += static_cast<std::size_t>(stride)) {
      Trace t;
      t.connection = key;
      t.start_index = start;
      t.symbols.reserve(static_cast<std::size_t>(w));
      for (std::size_t i = start; i < start + static_cast<std::size_t>(w); ++i) {
        const EncodedFlow& f = seq[i];
        t.symbols.push_back(make_symbol(f.proto_code, f.bytes_code, f.duration_code));
        if (f.flow.label == Label::malicious) t.malicious = true;
      }
      traces.push_back(std::move(t));
    }
  }
  return traces;
}

void write_trace_file(std::ostream& out, const std::vector<Trace>& traces) {
  std::set<Symbol> alphabet;
  for (const Trace& t : traces) alphabet.insert(t.symbols.begin(), t.symbols.end());
  out << traces.size() << ' ' << alphabet.size() << '\n';
  for (const Trace& t : traces) {
    out << (t.malicious ? 1 : 0) << ' ' << t.symbols.size();
    for (const Symbol& s : t.symbols) out << ' ' << s;
    out << '\n';
  }
}

std::vector<Trace> read_trace_file(std::istream& in) {
  std::size_t count = 0, alphabet_size = 0;
  if (!(in >> count >> alphabet_size)) throw DataError("bad trace file header");
  std::vector<Trace> traces;
  traces.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    int label = 0;
    std::size_t len = 0;
    if (!(in >> label >> len)) throw DataError("truncated trace file");
    Trace t;
    t.malicious = label == 1;
    t.symbols.resize(len);
    for (std::size_t s = 0; s < len; ++s) {
      if (!(in >> t.symbols[s])) throw DataError("truncated trace line");
    }
    traces.push_back(std::move(t));
  }
  return traces;
}

}  // namespace flowsm

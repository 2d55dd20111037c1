#pragma once

#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "flowsm/encoding.hpp"
#include "flowsm/flow.hpp"

namespace flowsm {

/// Per-flow token of the form "<proto_code>_<bytes_code>_<duration_code>".
using Symbol = std::string;

/// Protocol token -> small integer. TCP, UDP and ICMP are pinned to 0, 1, 2;
/// every other token observed at fit time gets 3, 4, ... in lexicographic
/// order. intern() extends the map deterministically for tokens first seen
/// later (single-threaded use only).
struct ProtocolCodec {
  std::map<std::string, int> codes{{"TCP", 0}, {"UDP", 1}, {"ICMP", 2}};
  int next_id = 3;

  static ProtocolCodec fit(const std::vector<FlowRecord>& flows);
  std::optional<int> lookup(const std::string& token) const;
  int intern(const std::string& token);

  nlohmann::ordered_json to_json() const;
  static ProtocolCodec from_json(const nlohmann::json& j);
};

Symbol make_symbol(int proto_code, int bytes_code, int duration_code);

/// Parses "a_b_c" back into three codes; nullopt when malformed.
std::optional<std::array<int, 3>> parse_symbol(const Symbol& s);

Symbol symbolize(const FlowRecord& flow, ProtocolCodec& codec, const EncodingTable& bytes_table,
                 const EncodingTable& duration_table);

struct EncodedFlow {
  FlowRecord flow;
  int proto_code = 0;
  int bytes_code = 0;
  int duration_code = 0;
};

/// Groups encoded flows by connection, time-sorted like group_by_connection.
std::map<ConnectionKey, std::vector<EncodedFlow>> group_encoded(
    const std::vector<EncodedFlow>& flows);

struct Trace {
  ConnectionKey connection;
  std::size_t start_index = 0;        // position in the connection's sorted sequence
  std::vector<Symbol> symbols;        // length = window size exactly
  bool malicious = false;             // any constituent flow malicious
};

/// Sliding windows of width w along each connection; connections shorter
/// than w contribute nothing. Throws std::invalid_argument when w < 2 or
/// stride < 1.
std::vector<Trace> build_traces(const std::map<ConnectionKey, std::vector<EncodedFlow>>& connections,
                                int w, int stride = 1);

/// Abbadingo-style text layout: header "<num_traces> <alphabet_size>", then
/// one line per trace: "<label 0|1> <w> sym sym ...".
void write_trace_file(std::ostream& out, const std::vector<Trace>& traces);
std::vector<Trace> read_trace_file(std::istream& in);

}  // namespace flowsm

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "flowsm/flow.hpp"
#include "flowsm/trace.hpp"

namespace flowsm::testing {

inline FlowRecord flow(std::int64_t ts, const std::string& src, const std::string& dst,
                       std::int64_t bytes, std::int64_t duration = 1,
                       const std::string& proto = "TCP", Label label = Label::benign) {
  FlowRecord f;
  f.timestamp = ts;
  f.duration_ms = duration;
  f.protocol = proto;
  f.src = src;
  f.dst = dst;
  f.bytes = bytes;
  f.label = label;
  return f;
}

// One connection whose byte values follow `bytes`, timestamps 0,1,2,...
inline std::vector<FlowRecord> byte_sequence(const std::vector<std::int64_t>& bytes,
                                             const std::string& src = "a",
                                             const std::string& dst = "b") {
  std::vector<FlowRecord> flows;
  for (std::size_t i = 0; i < bytes.size(); ++i) {
    flows.push_back(flow(static_cast<std::int64_t>(i), src, dst, bytes[i]));
  }
  return flows;
}

inline Trace make_trace(const std::vector<Symbol>& symbols, bool malicious = false) {
  Trace t;
  t.connection = {"a", "b"};
  t.symbols = symbols;
  t.malicious = malicious;
  return t;
}

inline std::vector<Trace> repeat_trace(const std::vector<Symbol>& symbols, std::size_t n) {
  std::vector<Trace> traces;
  for (std::size_t i = 0; i < n; ++i) traces.push_back(make_trace(symbols));
  return traces;
}

}  // namespace flowsm::testing

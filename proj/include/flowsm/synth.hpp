#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "flowsm/flow.hpp"

namespace flowsm {

struct PaletteEntry {
  std::int64_t value = 0;
  std::int64_t count = 0;  // exact number of occurrences to emit
};

/// Deterministic arithmetic scatter: value_k = base + (k * step) % range.
/// Produces a spread of mostly-unique values (maintenance-style traffic).
struct ScatterSpec {
  std::int64_t base = 0;
  std::int64_t step = 1;
  std::int64_t range = 1;
};

/// Value generator for one feature of one profile: either an exact-count
/// palette walked through a cyclic pattern of palette indices (entries that
/// run out fall back to the largest remaining count), or a scatter formula.
struct ValueStream {
  std::vector<PaletteEntry> palette;
  std::vector<int> pattern;  // indices into palette; empty = round-robin by remaining count
  std::optional<ScatterSpec> scatter;

  std::int64_t palette_total() const;
};

struct LengthRange {
  std::int64_t min = 1;
  std::int64_t max = 1;
};

struct BehaviorProfile {
  std::string protocol = "TCP";
  // Number of destination endpoints the connections cycle over; 0 gives
  // every connection a fresh destination (short-session style).
  int dst_pool = 1;
  LengthRange connection_length;
  ValueStream bytes;
  ValueStream durations;
  std::int64_t flows = 0;  // required only when both streams are scatter
};

struct HostSpec {
  std::string name;
  std::vector<BehaviorProfile> profiles;
};

enum class InjectionType { rare_bytes, shuffled_order, burst_durations };

InjectionType injection_type_from_string(const std::string& s);
const char* injection_type_name(InjectionType t);

struct Injection {
  std::string host;  // source host; must exist in hosts for shuffled/burst types
  std::string dst = "c2";
  std::string protocol;  // empty: reuse the host's first profile protocol
  InjectionType type = InjectionType::rare_bytes;
  std::int64_t flows = 0;
  double start_fraction = 0.5;  // position within the benign time span
  std::vector<std::int64_t> bytes_values;     // rare-bytes: cycled
  std::vector<std::int64_t> duration_values;  // rare-bytes / burst-durations: cycled
  std::int64_t connection_length = 0;         // 0: all flows in one connection
};

struct ScenarioSpec {
  std::uint64_t seed = 1;
  std::int64_t time_step_ms = 250;
  std::vector<HostSpec> hosts;
  std::vector<Injection> injections;

  static ScenarioSpec from_json(const nlohmann::json& j);
  static ScenarioSpec load(const std::string& path);
  nlohmann::ordered_json to_json() const;

  /// Throws ConfigError when an invariant is broken (empty palettes,
  /// non-positive counts, bad pattern indices, unknown injection hosts, ...).
  void validate() const;
};

/// Fully deterministic generation: benign flows follow each host's cyclic
/// profiles (every host profile is spread across the whole time span),
/// injected flows carry label=malicious. Output is sorted by timestamp,
/// ties in generation order.
std::vector<FlowRecord> generate(const ScenarioSpec& spec);

}  // namespace flowsm

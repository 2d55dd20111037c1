#include "flowsm/synth.hpp"

#include <algorithm>
#include <fstream>
#include <set>

#include "flowsm/errors.hpp"
#include "flowsm/rng.hpp"

namespace flowsm {

InjectionType injection_type_from_string(const std::string& s) {
  if (s == "rare-bytes") return InjectionType::rare_bytes;
  if (s == "shuffled-order") return InjectionType::shuffled_order;
  if (s == "burst-durations") return InjectionType::burst_durations;
  throw ConfigError("unknown injection type '" + s + "'");
}

const char* injection_type_name(InjectionType t) {
  switch (t) {
    case InjectionType::rare_bytes: return "rare-bytes";
    case InjectionType::shuffled_order: return "shuffled-order";
    default: return "burst-durations";
  }
}

std::int64_t ValueStream::palette_total() const {
  std::int64_t total = 0;
  for (const PaletteEntry& e : palette) total += e.count;
  return total;
}

namespace {

// Emits a palette stream of exact per-value counts: the cyclic pattern is
// walked slot by slot; an exhausted entry falls back to the entry with the
// largest remaining count (lowest index on ties).
class StreamRealizer {
 public:
  explicit StreamRealizer(const ValueStream& stream) : stream_(stream) {
    for (const PaletteEntry& e : stream.palette) remaining_.push_back(e.count);
  }

  std::int64_t next() {
    std::int64_t v = 0;
    if (stream_.scatter) {
      const ScatterSpec& s = *stream_.scatter;
      v = s.base + (static_cast<std::int64_t>(k_) * s.step) % s.range;
    } else {
      std::size_t idx = pick_index();
      --remaining_[idx];
      v = stream_.palette[idx].value;
    }
    ++k_;
    return v;
  }

 private:
  std::size_t pick_index() {
    if (!stream_.pattern.empty()) {
      auto want = static_cast<std::size_t>(stream_.pattern[k_ % stream_.pattern.size()]);
      if (remaining_[want] > 0) return want;
    }
    std::size_t best = 0;
    for (std::size_t i = 1; i < remaining_.size(); ++i) {
      if (remaining_[i] > remaining_[best]) best = i;
    }
    return best;
  }

  const ValueStream& stream_;
  std::vector<std::int64_t> remaining_;
  std::size_t k_ = 0;
};

std::int64_t profile_flow_count(const BehaviorProfile& p) {
  bool bytes_palette = !p.bytes.scatter.has_value();
  bool dur_palette = !p.durations.scatter.has_value();
  if (bytes_palette) return p.bytes.palette_total();
  if (dur_palette) return p.durations.palette_total();
  return p.flows;
}

void validate_stream(const ValueStream& s, const std::string& where) {
  if (s.scatter && !s.palette.empty()) {
    throw ConfigError(where + ": a stream is either a palette or a scatter, not both");
  }
  if (s.scatter) {
    if (s.scatter->range < 1 || s.scatter->step < 1) {
      throw ConfigError(where + ": scatter step and range must be positive");
    }
    return;
  }
  if (s.palette.empty()) throw ConfigError(where + ": palette must be non-empty");
  for (const PaletteEntry& e : s.palette) {
    if (e.count <= 0) throw ConfigError(where + ": palette counts must be positive");
    if (e.value < 0) throw ConfigError(where + ": palette values must be non-negative");
  }
  for (int idx : s.pattern) {
    if (idx < 0 || static_cast<std::size_t>(idx) >= s.palette.size()) {
      throw ConfigError(where + ": pattern index out of range");
    }
  }
}

const BehaviorProfile& motif_profile(const ScenarioSpec& spec, const std::string& host) {
  for (const HostSpec& h : spec.hosts) {
    if (h.name == host) return h.profiles.front();
  }
  throw ConfigError("injection references unknown host '" + host + "'");
}

}  // namespace

void ScenarioSpec::validate() const {
  if (time_step_ms < 1) throw ConfigError("time_step_ms must be positive");
  if (hosts.empty()) throw ConfigError("scenario needs at least one host");
  std::set<std::string> names;
  for (const HostSpec& h : hosts) {
    if (h.name.empty()) throw ConfigError("host name must be non-empty");
    if (!names.insert(h.name).second) throw ConfigError("duplicate host name '" + h.name + "'");
    if (h.profiles.empty()) throw ConfigError("host '" + h.name + "' has no profiles");
    for (std::size_t p = 0; p < h.profiles.size(); ++p) {
      const BehaviorProfile& prof = h.profiles[p];
      std::string where = "host '" + h.name + "' profile " + std::to_string(p);
      if (prof.protocol.empty()) throw ConfigError(where + ": protocol must be non-empty");
      validate_stream(prof.bytes, where + " bytes");
      validate_stream(prof.durations, where + " durations");
      if (prof.connection_length.min < 1 || prof.connection_length.max < prof.connection_length.min) {
        throw ConfigError(where + ": bad connection_length range");
      }
      if (prof.dst_pool < 0) throw ConfigError(where + ": dst_pool must be >= 0");
      bool bytes_palette = !prof.bytes.scatter.has_value();
      bool dur_palette = !prof.durations.scatter.has_value();
      if (bytes_palette && dur_palette &&
          prof.bytes.palette_total() != prof.durations.palette_total()) {
        throw ConfigError(where + ": bytes and durations palette totals differ");
      }
      if (!bytes_palette && !dur_palette && prof.flows < 1) {
        throw ConfigError(where + ": flows required when both streams are scatter");
      }
      if (profile_flow_count(prof) < 1) throw ConfigError(where + ": no flows to generate");
    }
  }
  for (std::size_t i = 0; i < injections.size(); ++i) {
    const Injection& inj = injections[i];
    std::string where = "injection " + std::to_string(i);
    if (inj.flows < 2) throw ConfigError(where + ": flow count must be >= 2 (window-sized)");
    if (inj.start_fraction < 0.0 || inj.start_fraction > 1.0) {
      throw ConfigError(where + ": start_fraction must be in [0,1]");
    }
    if (inj.dst.empty()) throw ConfigError(where + ": dst must be non-empty");
    if (inj.connection_length < 0) throw ConfigError(where + ": bad connection_length");
    switch (inj.type) {
      case InjectionType::rare_bytes:
        if (inj.bytes_values.empty()) throw ConfigError(where + ": rare-bytes needs bytes_values");
        if (inj.duration_values.empty()) motif_profile(*this, inj.host);
        break;
      case InjectionType::burst_durations:
        if (inj.duration_values.empty()) {
          throw ConfigError(where + ": burst-durations needs duration_values");
        }
        motif_profile(*this, inj.host);
        break;
      case InjectionType::shuffled_order:
        motif_profile(*this, inj.host);
        break;
    }
    if (inj.protocol.empty()) motif_profile(*this, inj.host);
  }
}

std::vector<FlowRecord> generate(const ScenarioSpec& spec) {
  spec.validate();

  constexpr std::int64_t kStartTs = 1'000'000;

  std::int64_t max_flows = 1;
  for (const HostSpec& h : spec.hosts) {
    for (const BehaviorProfile& p : h.profiles) {
      max_flows = std::max(max_flows, profile_flow_count(p));
    }
  }
  const std::int64_t span_ms = spec.time_step_ms * max_flows;

  std::vector<FlowRecord> flows;
  std::uint64_t stream_id = 0;

  for (const HostSpec& host : spec.hosts) {
    for (const BehaviorProfile& prof : host.profiles) {
      ++stream_id;
      SplitMix64 rng(spec.seed ^ (0x9E3779B97F4A7C15ULL * stream_id));
      const std::int64_t n = profile_flow_count(prof);
      const std::int64_t step = std::max<std::int64_t>(1, span_ms / n);

      StreamRealizer bytes_stream(prof.bytes);
      StreamRealizer dur_stream(prof.durations);

      std::int64_t emitted = 0;
      std::int64_t conn_idx = 0;
      std::int64_t ts = kStartTs;
      while (emitted < n) {
        std::int64_t len = rng.next_in(prof.connection_length.min, prof.connection_length.max);
        len = std::min(len, n - emitted);
        std::string dst = prof.dst_pool > 0
                              ? host.name + "-sv" + std::to_string(stream_id) + "-" +
                                    std::to_string(conn_idx % prof.dst_pool)
                              : host.name + "-m" + std::to_string(stream_id) + "-" +
                                    std::to_string(conn_idx);
        for (std::int64_t i = 0; i < len; ++i) {
          FlowRecord f;
          f.timestamp = ts;
          f.duration_ms = dur_stream.next();
          f.protocol = prof.protocol;
          f.src = host.name;
          f.dst = dst;
          f.bytes = bytes_stream.next();
          f.label = Label::benign;
          flows.push_back(std::move(f));
          ts += step;
          ++emitted;
        }
        ++conn_idx;
      }
    }
  }

  for (std::size_t idx = 0; idx < spec.injections.size(); ++idx) {
    const Injection& inj = spec.injections[idx];
    SplitMix64 rng(spec.seed ^ (0xD1B54A32D192ED03ULL * (idx + 1)));

    std::vector<std::int64_t> bytes_seq, dur_seq;
    bytes_seq.reserve(static_cast<std::size_t>(inj.flows));
    dur_seq.reserve(static_cast<std::size_t>(inj.flows));

    switch (inj.type) {
      case InjectionType::rare_bytes: {
        for (std::int64_t i = 0; i < inj.flows; ++i) {
          bytes_seq.push_back(inj.bytes_values[static_cast<std::size_t>(i) % inj.bytes_values.size()]);
        }
        if (!inj.duration_values.empty()) {
          for (std::int64_t i = 0; i < inj.flows; ++i) {
            dur_seq.push_back(
                inj.duration_values[static_cast<std::size_t>(i) % inj.duration_values.size()]);
          }
        } else {
          StreamRealizer durs(motif_profile(spec, inj.host).durations);
          for (std::int64_t i = 0; i < inj.flows; ++i) dur_seq.push_back(durs.next());
        }
        break;
      }
      case InjectionType::shuffled_order: {
        const BehaviorProfile& motif = motif_profile(spec, inj.host);
        StreamRealizer bytes(motif.bytes);
        StreamRealizer durs(motif.durations);
        for (std::int64_t i = 0; i < inj.flows; ++i) {
          bytes_seq.push_back(bytes.next());
          dur_seq.push_back(durs.next());
        }
        // one permutation over (bytes, duration) pairs: values stay realistic,
        // the order is what breaks
        for (std::size_t i = bytes_seq.size() - 1; i > 0; --i) {
          std::size_t j = rng.next_below(i + 1);
          std::swap(bytes_seq[i], bytes_seq[j]);
          std::swap(dur_seq[i], dur_seq[j]);
        }
        break;
      }
      case InjectionType::burst_durations: {
        const BehaviorProfile& motif = motif_profile(spec, inj.host);
        StreamRealizer bytes(motif.bytes);
        for (std::int64_t i = 0; i < inj.flows; ++i) {
          bytes_seq.push_back(bytes.next());
          dur_seq.push_back(
              inj.duration_values[static_cast<std::size_t>(i) % inj.duration_values.size()]);
        }
        break;
      }
    }

    std::string protocol = inj.protocol.empty() ? motif_profile(spec, inj.host).protocol
                                                : inj.protocol;
    std::int64_t anchor = kStartTs + static_cast<std::int64_t>(
                                         inj.start_fraction * static_cast<double>(span_ms));
    std::int64_t chunk = inj.connection_length > 0 ? inj.connection_length : inj.flows;
    for (std::int64_t i = 0; i < inj.flows; ++i) {
      FlowRecord f;
      f.timestamp = anchor + i * spec.time_step_ms;
      f.duration_ms = dur_seq[static_cast<std::size_t>(i)];
      f.protocol = protocol;
      f.src = inj.host;
      f.dst = inj.dst + "-" + std::to_string(i / chunk);
      f.bytes = bytes_seq[static_cast<std::size_t>(i)];
      f.label = Label::malicious;
      flows.push_back(std::move(f));
    }
  }

  std::stable_sort(flows.begin(), flows.end(),
                   [](const FlowRecord& a, const FlowRecord& b) { return a.timestamp < b.timestamp; });
  return flows;
}

namespace {

ValueStream stream_from_json(const nlohmann::json& j) {
  ValueStream s;
  if (j.contains("scatter")) {
    ScatterSpec sc;
    sc.base = j.at("scatter").at("base").get<std::int64_t>();
    sc.step = j.at("scatter").at("step").get<std::int64_t>();
    sc.range = j.at("scatter").at("range").get<std::int64_t>();
    s.scatter = sc;
    return s;
  }
  for (const auto& entry : j.at("palette")) {
    s.palette.push_back({entry.at(0).get<std::int64_t>(), entry.at(1).get<std::int64_t>()});
  }
  if (j.contains("pattern")) s.pattern = j.at("pattern").get<std::vector<int>>();
  return s;
}

nlohmann::ordered_json stream_to_json(const ValueStream& s) {
  nlohmann::ordered_json j;
  if (s.scatter) {
    j["scatter"] = {{"base", s.scatter->base}, {"step", s.scatter->step}, {"range", s.scatter->range}};
    return j;
  }
  nlohmann::ordered_json palette = nlohmann::ordered_json::array();
  for (const PaletteEntry& e : s.palette) palette.push_back({e.value, e.count});
  j["palette"] = std::move(palette);
  if (!s.pattern.empty()) j["pattern"] = s.pattern;
  return j;
}

}  // namespace

ScenarioSpec ScenarioSpec::from_json(const nlohmann::json& j) {
  ScenarioSpec spec;
  spec.seed = j.at("seed").get<std::uint64_t>();
  if (j.contains("time_step_ms")) spec.time_step_ms = j.at("time_step_ms").get<std::int64_t>();
  for (const auto& hj : j.at("hosts")) {
    HostSpec h;
    h.name = hj.at("name").get<std::string>();
    for (const auto& pj : hj.at("profiles")) {
      BehaviorProfile p;
      p.protocol = pj.at("protocol").get<std::string>();
      if (pj.contains("dst_pool")) p.dst_pool = pj.at("dst_pool").get<int>();
      p.connection_length.min = pj.at("connection_length").at("min").get<std::int64_t>();
      p.connection_length.max = pj.at("connection_length").at("max").get<std::int64_t>();
      p.bytes = stream_from_json(pj.at("bytes"));
      p.durations = stream_from_json(pj.at("durations"));
      if (pj.contains("flows")) p.flows = pj.at("flows").get<std::int64_t>();
      h.profiles.push_back(std::move(p));
    }
    spec.hosts.push_back(std::move(h));
  }
  if (j.contains("injections")) {
    for (const auto& ij : j.at("injections")) {
      Injection inj;
      inj.host = ij.at("host").get<std::string>();
      if (ij.contains("dst")) inj.dst = ij.at("dst").get<std::string>();
      if (ij.contains("protocol")) inj.protocol = ij.at("protocol").get<std::string>();
      inj.type = injection_type_from_string(ij.at("type").get<std::string>());
      inj.flows = ij.at("flows").get<std::int64_t>();
      inj.start_fraction = ij.at("start_fraction").get<double>();
      if (ij.contains("bytes_values")) {
        inj.bytes_values = ij.at("bytes_values").get<std::vector<std::int64_t>>();
      }
      if (ij.contains("duration_values")) {
        inj.duration_values = ij.at("duration_values").get<std::vector<std::int64_t>>();
      }
      if (ij.contains("connection_length")) {
        inj.connection_length = ij.at("connection_length").get<std::int64_t>();
      }
      spec.injections.push_back(std::move(inj));
    }
  }
  return spec;
}

nlohmann::ordered_json ScenarioSpec::to_json() const {
  nlohmann::ordered_json j;
  j["seed"] = seed;
  j["time_step_ms"] = time_step_ms;
  nlohmann::ordered_json hosts_json = nlohmann::ordered_json::array();
  for (const HostSpec& h : hosts) {
    nlohmann::ordered_json hj;
    hj["name"] = h.name;
    nlohmann::ordered_json profiles = nlohmann::ordered_json::array();
    for (const BehaviorProfile& p : h.profiles) {
      nlohmann::ordered_json pj;
      pj["protocol"] = p.protocol;
      pj["dst_pool"] = p.dst_pool;
      pj["connection_length"] = {{"min", p.connection_length.min}, {"max", p.connection_length.max}};
      pj["bytes"] = stream_to_json(p.bytes);
      pj["durations"] = stream_to_json(p.durations);
      if (p.flows > 0) pj["flows"] = p.flows;
      profiles.push_back(std::move(pj));
    }
    hj["profiles"] = std::move(profiles);
    hosts_json.push_back(std::move(hj));
  }
  j["hosts"] = std::move(hosts_json);
  nlohmann::ordered_json inj_json = nlohmann::ordered_json::array();
  for (const Injection& inj : injections) {
    nlohmann::ordered_json ij;
    ij["host"] = inj.host;
    ij["dst"] = inj.dst;
    if (!inj.protocol.empty()) ij["protocol"] = inj.protocol;
    ij["type"] = injection_type_name(inj.type);
    ij["flows"] = inj.flows;
    ij["start_fraction"] = inj.start_fraction;
    if (!inj.bytes_values.empty()) ij["bytes_values"] = inj.bytes_values;
    if (!inj.duration_values.empty()) ij["duration_values"] = inj.duration_values;
    if (inj.connection_length > 0) ij["connection_length"] = inj.connection_length;
    inj_json.push_back(std::move(ij));
  }
  j["injections"] = std::move(inj_json);
  return j;
}

ScenarioSpec ScenarioSpec::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open scenario spec: " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("bad scenario spec JSON in " + path + ": " + e.what());
  }
  try {
    return from_json(j);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("bad scenario spec " + path + ": " + e.what());
  }
}

}  // namespace flowsm

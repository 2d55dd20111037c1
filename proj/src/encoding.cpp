#include "flowsm/encoding.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <set>
#include <stdexcept>

#include "flowsm/errors.hpp"
#include "flowsm/kmeans.hpp"

namespace flowsm {

const char* feature_name(FlowFeature f) {
  return f == FlowFeature::bytes ? "bytes" : "duration_ms";
}

std::int64_t feature_value(const FlowRecord& r, FlowFeature f) {
  return f == FlowFeature::bytes ? r.bytes : r.duration_ms;
}

const char* encoding_kind_name(EncodingKind k) {
  switch (k) {
    case EncodingKind::contextual: return "contextual";
    case EncodingKind::percentile: return "percentile";
    default: return "frequency";
  }
}

EncodingKind encoding_kind_from_string(const std::string& s) {
  if (s == "contextual") return EncodingKind::contextual;
  if (s == "percentile") return EncodingKind::percentile;
  if (s == "frequency") return EncodingKind::frequency;
  throw ConfigError("unknown encoding kind '" + s + "'");
}

BinEdges compute_decile_edges(std::vector<std::int64_t> values) {
  if (values.empty()) throw std::invalid_argument("compute_decile_edges: empty value multiset");
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  const double top = static_cast<double>(values.back());
  BinEdges edges;
  for (std::size_t i = 1; i <= 9; ++i) {
    // nearest-rank: ceil(i*n/10), computed in integers
    std::size_t rank = (i * n + 9) / 10;
    double edge = static_cast<double>(values[rank - 1]);
    // an edge at the maximum would close an empty overflow bin (a constant
    // input collapses to a single bin)
    if (edge >= top) break;
    if (edges.empty() || edge > edges.back()) edges.push_back(edge);
  }
  return edges;
}

std::size_t bin_index(double x, const BinEdges& edges) {
  // smallest i with x <= edges[i], else edges.size()
  return static_cast<std::size_t>(std::lower_bound(edges.begin(), edges.end(), x) - edges.begin());
}

std::map<std::int64_t, ContextVector> build_context_vectors(FlowFeature feature,
                                                            const ConnectionMap& connections,
                                                            const BinEdges& edges) {
  std::map<std::int64_t, ContextVector> vectors;
  auto slot_of = [&](std::int64_t neighbour) { return bin_index(static_cast<double>(neighbour), edges); };

  for (const auto& [key, seq] : connections) {
    for (std::size_t p = 0; p < seq.size(); ++p) {
      std::int64_t v = feature_value(seq[p], feature);
      ContextVector& cv = vectors[v];
      cv.value = v;
      ++cv.total_freq;
      if (p > 0) {
        std::int64_t prev = feature_value(seq[p - 1], feature);
        if (prev == v) {
          ++cv.counts[kPrevSelfSlot];
        } else {
          ++cv.counts[slot_of(prev)];
        }
      }
      if (p + 1 < seq.size()) {
        std::int64_t next = feature_value(seq[p + 1], feature);
        if (next == v) {
          ++cv.counts[kNextSelfSlot];
        } else {
          ++cv.counts[kPrevSelfSlot + 1 + slot_of(next)];
        }
      }
    }
  }
  return vectors;
}

namespace {

std::vector<double> transform_vector(const ContextVector& cv, const std::string& transform) {
  std::vector<double> out(kContextSlots);
  for (std::size_t i = 0; i < kContextSlots; ++i) {
    double c = static_cast<double>(cv.counts[i]);
    out[i] = transform == "raw" ? c : std::log1p(c);
  }
  return out;
}

// bin -> compacted code over the occupied bins; values in an unoccupied bin
// (only possible for bins holding no fitted value) take the nearest occupied
// bin's code, lower bin on ties.
std::vector<int> compact_bin_codes(const std::vector<bool>& occupied) {
  const std::size_t bins = occupied.size();
  std::vector<int> codes(bins, -1);
  int next = 0;
  for (std::size_t b = 0; b < bins; ++b) {
    if (occupied[b]) codes[b] = next++;
  }
  for (std::size_t b = 0; b < bins; ++b) {
    if (codes[b] >= 0) continue;
    for (std::size_t dist = 1; dist < bins; ++dist) {
      if (b >= dist && codes[b - dist] >= 0) {
        codes[b] = codes[b - dist];
        break;
      }
      if (b + dist < bins && codes[b + dist] >= 0) {
        codes[b] = codes[b + dist];
        break;
      }
    }
  }
  return codes;
}

}  // namespace

EncodingTable fit_contextual_encoding(FlowFeature feature, const ConnectionMap& connections,
                                      int k, std::uint64_t seed, const std::string& transform) {
  if (k < 1) throw std::invalid_argument("fit_contextual_encoding: k must be >= 1");
  if (transform != "log1p" && transform != "raw") {
    throw ConfigError("unknown vector transform '" + transform + "'");
  }

  std::vector<std::int64_t> all_values;
  for (const auto& [key, seq] : connections) {
    for (const FlowRecord& f : seq) all_values.push_back(feature_value(f, feature));
  }
  if (all_values.empty()) {
    throw std::invalid_argument("fit_contextual_encoding: no values to fit");
  }

  EncodingTable table;
  table.feature = feature_name(feature);
  table.kind = EncodingKind::contextual;
  table.transform = transform;
  table.edges = compute_decile_edges(all_values);
  table.requested_k = k;

  auto vectors = build_context_vectors(feature, connections, table.edges);

  // unique values in ascending order pin the point matrix layout
  std::vector<std::int64_t> uniques;
  std::vector<std::vector<double>> points;
  uniques.reserve(vectors.size());
  for (const auto& [v, cv] : vectors) {
    uniques.push_back(v);
    points.push_back(transform_vector(cv, transform));
  }

  std::set<std::vector<double>> distinct(points.begin(), points.end());
  int effective_k = std::min<int>(k, static_cast<int>(distinct.size()));
  if (effective_k < k) {
    std::cerr << "warning: k=" << k << " clamped to " << effective_k
              << " (only " << distinct.size() << " distinct context vectors for "
              << table.feature << ")\n";
  }
  table.effective_k = effective_k;

  ClusteringResult clustering = kmeans_fit(points, effective_k, seed);
  table.centroids = clustering.centroids;
  for (std::size_t i = 0; i < uniques.size(); ++i) {
    table.codes[uniques[i]] = clustering.assignments[i];
  }
  table.code_count = effective_k;
  return table;
}

EncodingTable fit_percentile_encoding(FlowFeature feature,
                                      const std::vector<std::int64_t>& values) {
  if (values.empty()) throw std::invalid_argument("fit_percentile_encoding: empty values");
  EncodingTable table;
  table.feature = feature_name(feature);
  table.kind = EncodingKind::percentile;
  table.edges = compute_decile_edges(values);

  const std::size_t bins = table.edges.size() + 1;
  std::set<std::int64_t> uniques(values.begin(), values.end());
  std::vector<bool> occupied(bins, false);
  for (std::int64_t v : uniques) occupied[bin_index(static_cast<double>(v), table.edges)] = true;
  table.bin_codes = compact_bin_codes(occupied);
  for (std::int64_t v : uniques) {
    table.codes[v] = table.bin_codes[bin_index(static_cast<double>(v), table.edges)];
  }
  table.code_count = 1 + *std::max_element(table.bin_codes.begin(), table.bin_codes.end());
  return table;
}

EncodingTable fit_frequency_encoding(FlowFeature feature, const std::vector<std::int64_t>& values,
                                     std::int64_t cutoff) {
  if (values.empty()) throw std::invalid_argument("fit_frequency_encoding: empty values");
  EncodingTable table;
  table.feature = feature_name(feature);
  table.kind = EncodingKind::frequency;
  table.edges = compute_decile_edges(values);

  std::map<std::int64_t, std::int64_t> freq;
  for (std::int64_t v : values) ++freq[v];

  const std::size_t bins = table.edges.size() + 1;
  std::vector<bool> occupied(bins, false);
  for (const auto& [v, n] : freq) {
    if (n <= cutoff) occupied[bin_index(static_cast<double>(v), table.edges)] = true;
  }
  // all bins may be unoccupied when every value is frequent; unseen values
  // then share code 0 with the lowest bin
  if (std::find(occupied.begin(), occupied.end(), true) == occupied.end()) occupied[0] = true;
  table.bin_codes = compact_bin_codes(occupied);

  int next_code = 1 + *std::max_element(table.bin_codes.begin(), table.bin_codes.end());
  for (const auto& [v, n] : freq) {  // std::map: ascending value order
    if (n > cutoff) {
      table.codes[v] = next_code++;
    } else {
      table.codes[v] = table.bin_codes[bin_index(static_cast<double>(v), table.edges)];
    }
  }
  table.code_count = next_code;
  return table;
}

int EncodingTable::encode(std::int64_t v) const {
  auto it = codes.find(v);
  if (it != codes.end()) return it->second;
  if (kind == EncodingKind::contextual) {
    // unseen values carry an all-zero context; both transforms map it to zero
    std::vector<double> zero(kContextSlots, 0.0);
    return nearest_centroid(zero, centroids);
  }
  return bin_codes[bin_index(static_cast<double>(v), edges)];
}

int encode_value(const EncodingTable& table, std::int64_t v) { return table.encode(v); }

nlohmann::ordered_json EncodingTable::to_json() const {
  nlohmann::ordered_json j;
  j["feature"] = feature;
  j["kind"] = encoding_kind_name(kind);
  j["transform"] = transform;
  j["edges"] = edges;
  j["code_count"] = code_count;
  j["requested_k"] = requested_k;
  j["effective_k"] = effective_k;
  nlohmann::ordered_json codes_json = nlohmann::ordered_json::array();
  for (const auto& [v, c] : codes) codes_json.push_back({v, c});
  j["codes"] = std::move(codes_json);
  j["bin_codes"] = bin_codes;
  j["centroids"] = centroids;
  if (kind == EncodingKind::contextual) {
    j["fallback"] = "nearest-centroid of the zero context vector";
  } else {
    j["fallback"] = "decile bin code";
  }
  return j;
}

EncodingTable EncodingTable::from_json(const nlohmann::json& j) {
  EncodingTable t;
  t.feature = j.at("feature").get<std::string>();
  t.kind = encoding_kind_from_string(j.at("kind").get<std::string>());
  t.transform = j.at("transform").get<std::string>();
  t.edges = j.at("edges").get<BinEdges>();
  t.code_count = j.at("code_count").get<int>();
  t.requested_k = j.at("requested_k").get<int>();
  t.effective_k = j.at("effective_k").get<int>();
  for (const auto& pair : j.at("codes")) {
    t.codes[pair.at(0).get<std::int64_t>()] = pair.at(1).get<int>();
  }
  t.bin_codes = j.at("bin_codes").get<std::vector<int>>();
  t.centroids = j.at("centroids").get<std::vector<std::vector<double>>>();
  return t;
}

}  // namespace flowsm

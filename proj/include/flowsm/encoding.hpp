#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "flowsm/flow.hpp"

namespace flowsm {

/// Strictly increasing decile edges, deduplicated, at most 9 entries.
using BinEdges = std::vector<double>;

enum class FlowFeature { bytes, duration_ms };

const char* feature_name(FlowFeature f);
std::int64_t feature_value(const FlowRecord& r, FlowFeature f);

/// Nearest-rank deciles over the full multiset: edge_i = sorted[ceil(i*n/10)-1]
/// for i = 1..9, duplicates collapsed. Throws std::invalid_argument on empty input.
BinEdges compute_decile_edges(std::vector<std::int64_t> values);

/// Smallest i with x <= edges[i], else edges.size(). Total bins = edges.size()+1.
std::size_t bin_index(double x, const BinEdges& edges);

inline constexpr std::size_t kContextSlots = 22;
inline constexpr std::size_t kPrevSelfSlot = 10;
inline constexpr std::size_t kNextSelfSlot = 21;

/// Context of one unique feature value: slots 0-9 hold decile-binned
/// frequencies of predecessor values, slot 10 the previous self-frequency,
/// slots 11-20 the successor bins, slot 21 the next self-frequency.
struct ContextVector {
  std::int64_t value = 0;
  std::array<std::int64_t, kContextSlots> counts{};
  std::int64_t total_freq = 0;
};

/// One vector per unique value of the feature; neighbours are taken within
/// each connection's time-ordered flow sequence only. Values seen only in
/// length-1 connections keep the zero vector.
std::map<std::int64_t, ContextVector> build_context_vectors(FlowFeature feature,
                                                            const ConnectionMap& connections,
                                                            const BinEdges& edges);

enum class EncodingKind { contextual, percentile, frequency };

const char* encoding_kind_name(EncodingKind k);
EncodingKind encoding_kind_from_string(const std::string& s);

/// Fitted value -> code mapping for one feature, plus everything needed to
/// encode values not seen at fit time.
struct EncodingTable {
  std::string feature;
  EncodingKind kind = EncodingKind::contextual;
  BinEdges edges;
  std::map<std::int64_t, int> codes;            // observed value -> code
  std::vector<std::vector<double>> centroids;   // contextual only
  std::vector<int> bin_codes;                   // percentile/frequency: bin -> code
  std::string transform = "log1p";              // contextual vector transform: log1p | raw
  int code_count = 0;
  int requested_k = 0;   // contextual: k before clamping
  int effective_k = 0;   // contextual: k actually used

  /// Exact lookup for fitted values; nearest centroid (contextual) or bin
  /// code (percentile/frequency) for unseen ones.
  int encode(std::int64_t v) const;

  nlohmann::ordered_json to_json() const;
  static EncodingTable from_json(const nlohmann::json& j);
};

/// Clusters log1p-damped (or raw) context vectors with k-means and uses the
/// cluster id as the code. k is clamped to the number of distinct vectors,
/// with a warning on stderr.
EncodingTable fit_contextual_encoding(FlowFeature feature, const ConnectionMap& connections,
                                      int k, std::uint64_t seed,
                                      const std::string& transform = "log1p");

/// code = decile bin of the value; codes compacted over non-empty bins.
EncodingTable fit_percentile_encoding(FlowFeature feature,
                                      const std::vector<std::int64_t>& values);

/// Values with frequency > cutoff get their own codes (assigned after the
/// bin codes, in ascending value order); the rest are binned like the
/// percentile encoding.
EncodingTable fit_frequency_encoding(FlowFeature feature,
                                     const std::vector<std::int64_t>& values,
                                     std::int64_t cutoff = 1000);

int encode_value(const EncodingTable& table, std::int64_t v);

}  // namespace flowsm

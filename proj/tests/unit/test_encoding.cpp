#include <doctest.h>

#include <algorithm>
#include <map>
#include <set>

#include "flowsm/encoding.hpp"
#include "flowsm/errors.hpp"
#include "flowsm/rng.hpp"
#include "helpers.hpp"

using namespace flowsm;
using flowsm::testing::byte_sequence;

namespace {

// Oracle: expand the multiset, sort it, and take nearest-rank deciles
// (rank ceil(i*n/10), 1-based), collapsing duplicates and dropping edges at
// the maximum (they would close an empty overflow bin).
std::vector<double> decile_oracle(const std::map<std::int64_t, std::int64_t>& multiset) {
  std::vector<std::int64_t> expanded;
  for (const auto& [value, count] : multiset) {
    for (std::int64_t i = 0; i < count; ++i) expanded.push_back(value);
  }
  std::sort(expanded.begin(), expanded.end());
  const std::size_t n = expanded.size();
  std::vector<double> edges;
  for (std::size_t i = 1; i <= 9; ++i) {
    std::size_t rank = (i * n + 9) / 10;
    double e = static_cast<double>(expanded[rank - 1]);
    if (e >= static_cast<double>(expanded.back())) continue;
    if (edges.empty() || e > edges.back()) edges.push_back(e);
  }
  return edges;
}

std::vector<std::int64_t> expand(const std::map<std::int64_t, std::int64_t>& multiset) {
  std::vector<std::int64_t> out;
  for (const auto& [value, count] : multiset) {
    for (std::int64_t i = 0; i < count; ++i) out.push_back(value);
  }
  return out;
}

const std::map<std::int64_t, std::int64_t> kTable1{
    {37, 1}, {39, 4}, {80, 24771}, {81, 3158}, {37548, 4}};

}  // namespace

TEST_CASE("decile edges: uniform ranks, constant input, Table-1 multiset") {
  CHECK(compute_decile_edges({1, 2, 3, 4, 5, 6, 7, 8, 9, 10}) ==
        BinEdges{1, 2, 3, 4, 5, 6, 7, 8, 9});
  CHECK(compute_decile_edges({5, 5, 5, 5}).empty());
  CHECK_THROWS_AS(compute_decile_edges({}), std::invalid_argument);

  // frozen from the rank oracle over the expanded multiset: deciles 1-8 all
  // equal 80, decile 9 equals 81
  BinEdges table1_edges = compute_decile_edges(expand(kTable1));
  CHECK(table1_edges == BinEdges{80, 81});
  CHECK(table1_edges == decile_oracle(kTable1));
}

TEST_CASE("decile edges agree with the oracle on random multisets") {
  SplitMix64 gen(31337);
  for (int trial = 0; trial < 200; ++trial) {
    std::map<std::int64_t, std::int64_t> multiset;
    int uniques = 1 + static_cast<int>(gen.next_below(12));
    for (int u = 0; u < uniques; ++u) {
      multiset[static_cast<std::int64_t>(gen.next_below(50))] =
          1 + static_cast<std::int64_t>(gen.next_below(40));
    }
    CHECK(compute_decile_edges(expand(multiset)) == decile_oracle(multiset));
  }
}

TEST_CASE("bin_index boundaries") {
  BinEdges edges{1, 2};
  CHECK(bin_index(0, edges) == 0);
  CHECK(bin_index(2, edges) == 1);   // boundary goes to the bin it closes
  CHECK(bin_index(99, edges) == 2);  // overflow bin
  CHECK(bin_index(5, {}) == 0);      // no edges: single bin
}

TEST_CASE("context vectors for [80, 80, 443] with edges [80]") {
  ConnectionMap conns = group_by_connection(byte_sequence({80, 80, 443}));
  BinEdges edges{80};
  auto vectors = build_context_vectors(FlowFeature::bytes, conns, edges);

  const ContextVector& v80 = vectors.at(80);
  CHECK(v80.total_freq == 2);
  CHECK(v80.counts[10] == 1);  // prev self
  CHECK(v80.counts[12] == 1);  // next = 443, bin 1
  CHECK(v80.counts[21] == 1);  // next self
  std::int64_t sum80 = 0;
  for (auto c : v80.counts) sum80 += c;
  CHECK(sum80 == 3);

  const ContextVector& v443 = vectors.at(443);
  CHECK(v443.total_freq == 1);
  CHECK(v443.counts[0] == 1);  // prev = 80 <= edge 80 -> bin 0
  std::int64_t sum443 = 0;
  for (auto c : v443.counts) sum443 += c;
  CHECK(sum443 == 1);
}

TEST_CASE("length-1 connection leaves a zero vector; self-pairs hit both self slots") {
  ConnectionMap lonely = group_by_connection(byte_sequence({7}));
  auto v = build_context_vectors(FlowFeature::bytes, lonely, {1, 2});
  CHECK(v.at(7).total_freq == 1);
  for (auto c : v.at(7).counts) CHECK(c == 0);

  std::vector<FlowRecord> flows = byte_sequence({5, 5}, "a", "b");
  auto more = byte_sequence({5, 5}, "c", "d");
  flows.insert(flows.end(), more.begin(), more.end());
  auto v5 = build_context_vectors(FlowFeature::bytes, group_by_connection(flows), {1, 2});
  CHECK(v5.at(5).total_freq == 4);
  CHECK(v5.at(5).counts[10] == 2);
  CHECK(v5.at(5).counts[21] == 2);
}

TEST_CASE("context vector side sums and global self-slot balance") {
  SplitMix64 gen(99);
  std::vector<FlowRecord> flows;
  for (int conn = 0; conn < 20; ++conn) {
    int len = 1 + static_cast<int>(gen.next_below(12));
    std::vector<std::int64_t> bytes;
    for (int i = 0; i < len; ++i) bytes.push_back(static_cast<std::int64_t>(gen.next_below(6)));
    auto flow_seq = byte_sequence(bytes, "h" + std::to_string(conn), "d");
    flows.insert(flows.end(), flow_seq.begin(), flow_seq.end());
  }
  ConnectionMap conns = group_by_connection(flows);
  std::vector<std::int64_t> all;
  for (const auto& f : flows) all.push_back(f.bytes);
  BinEdges edges = compute_decile_edges(all);
  auto vectors = build_context_vectors(FlowFeature::bytes, conns, edges);

  std::int64_t prev_self_total = 0, next_self_total = 0;
  for (const auto& [value, cv] : vectors) {
    std::int64_t prev_side = 0, next_side = 0;
    for (std::size_t s = 0; s <= 10; ++s) prev_side += cv.counts[s];
    for (std::size_t s = 11; s <= 21; ++s) next_side += cv.counts[s];
    CHECK(prev_side <= cv.total_freq);
    CHECK(next_side <= cv.total_freq);
    prev_self_total += cv.counts[10];
    next_self_total += cv.counts[21];
  }
  CHECK(prev_self_total == next_self_total);

  // permuting flow insertion order changes nothing
  std::vector<FlowRecord> shuffled = flows;
  for (std::size_t i = shuffled.size() - 1; i > 0; --i) {
    std::swap(shuffled[i], shuffled[gen.next_below(i + 1)]);
  }
  auto vectors2 = build_context_vectors(FlowFeature::bytes, group_by_connection(shuffled), edges);
  REQUIRE(vectors2.size() == vectors.size());
  for (const auto& [value, cv] : vectors) {
    CHECK(vectors2.at(value).counts == cv.counts);
    CHECK(vectors2.at(value).total_freq == cv.total_freq);
  }
}

TEST_CASE("contextual encoding separates the Table-1 style stream with k=2") {
  // 80 and 81 in high-frequency runs, the stray values once or a few times
  std::vector<FlowRecord> flows;
  auto add = [&](const std::vector<std::int64_t>& bytes, const std::string& src) {
    auto seq = byte_sequence(bytes, src, "srv");
    flows.insert(flows.end(), seq.begin(), seq.end());
  };
  add(std::vector<std::int64_t>(2000, 80), "w80");
  add(std::vector<std::int64_t>(300, 81), "w81");
  add({39, 37, 39, 37548, 39, 37548, 39, 37548, 37548}, "stray");

  EncodingTable t = fit_contextual_encoding(FlowFeature::bytes, group_by_connection(flows), 2, 42);
  CHECK(t.codes.at(80) == t.codes.at(81));
  CHECK(t.codes.at(37) == t.codes.at(39));
  CHECK(t.codes.at(39) == t.codes.at(37548));
  CHECK(t.codes.at(80) != t.codes.at(37));
}

TEST_CASE("contextual k clamps to the number of distinct vectors") {
  // two values, identical context vectors (two parallel [5,5] connections)
  std::vector<FlowRecord> flows = byte_sequence({5, 5}, "a", "b");
  auto seq2 = byte_sequence({6, 6}, "c", "d");
  flows.insert(flows.end(), seq2.begin(), seq2.end());
  EncodingTable t = fit_contextual_encoding(FlowFeature::bytes, group_by_connection(flows), 2, 1);
  CHECK(t.effective_k == 1);
  CHECK(t.codes.at(5) == 0);
  CHECK(t.codes.at(6) == 0);

  EncodingTable single =
      fit_contextual_encoding(FlowFeature::bytes, group_by_connection(byte_sequence({9, 9})), 2, 1);
  CHECK(single.codes.size() == 1);
  CHECK(single.codes.at(9) == 0);
}

TEST_CASE("contextual encoding is deterministic for a fixed seed") {
  SplitMix64 gen(7);
  std::vector<FlowRecord> flows;
  for (int c = 0; c < 10; ++c) {
    std::vector<std::int64_t> bytes;
    for (int i = 0; i < 30; ++i) bytes.push_back(static_cast<std::int64_t>(gen.next_below(15)));
    auto seq = byte_sequence(bytes, "h" + std::to_string(c), "d");
    flows.insert(flows.end(), seq.begin(), seq.end());
  }
  ConnectionMap conns = group_by_connection(flows);
  EncodingTable a = fit_contextual_encoding(FlowFeature::bytes, conns, 4, 5);
  EncodingTable b = fit_contextual_encoding(FlowFeature::bytes, conns, 4, 5);
  CHECK(a.to_json().dump() == b.to_json().dump());
}

TEST_CASE("percentile encoding: examples and monotonicity") {
  EncodingTable uniform = fit_percentile_encoding(FlowFeature::bytes, {1, 2, 3, 4, 5, 6, 7, 8, 9, 10});
  CHECK(uniform.codes.at(1) == 0);

  EncodingTable constant = fit_percentile_encoding(FlowFeature::bytes, {4, 4, 4});
  CHECK(constant.codes.at(4) == 0);
  CHECK(constant.code_count == 1);

  EncodingTable table1 = fit_percentile_encoding(FlowFeature::bytes, expand(kTable1));
  CHECK(table1.edges == BinEdges{80, 81});
  CHECK(table1.codes.at(81) == 1);  // bin of 81 under edges [80, 81]

  // monotone: v1 <= v2 implies code(v1) <= code(v2)
  SplitMix64 gen(17);
  std::vector<std::int64_t> values;
  for (int i = 0; i < 500; ++i) values.push_back(static_cast<std::int64_t>(gen.next_below(100)));
  EncodingTable t = fit_percentile_encoding(FlowFeature::bytes, values);
  for (std::int64_t v = 0; v < 99; ++v) {
    CHECK(t.encode(v) <= t.encode(v + 1));
  }
}

TEST_CASE("frequency encoding: unique codes above the cutoff, bins below") {
  EncodingTable t = fit_frequency_encoding(FlowFeature::bytes, expand(kTable1), 1000);
  // 80 (24771) and 81 (3158) exceed the cutoff and get their own codes,
  // assigned after the bin codes in ascending value order
  std::set<int> bin_code_set(t.bin_codes.begin(), t.bin_codes.end());
  CHECK(!bin_code_set.count(t.codes.at(80)));
  CHECK(!bin_code_set.count(t.codes.at(81)));
  CHECK(t.codes.at(80) + 1 == t.codes.at(81));
  CHECK(t.codes.at(37) == t.codes.at(39));   // both in the lowest bin
  CHECK(t.codes.at(37) != t.codes.at(37548));
  // codes are contiguous from 0
  std::set<int> all_codes;
  for (const auto& [v, c] : t.codes) all_codes.insert(c);
  CHECK(*all_codes.begin() == 0);
  CHECK(*all_codes.rbegin() == static_cast<int>(all_codes.size()) - 1);

  // all frequencies at or below the cutoff: degenerates to the percentile encoding
  std::vector<std::int64_t> small = {1, 1, 2, 3, 3, 3, 9};
  EncodingTable freq = fit_frequency_encoding(FlowFeature::bytes, small, 1000);
  EncodingTable perc = fit_percentile_encoding(FlowFeature::bytes, small);
  CHECK(freq.codes == perc.codes);

  // boundary: cutoff 0 means "more than zero occurrences", so everything is unique
  EncodingTable zero = fit_frequency_encoding(FlowFeature::bytes, {5, 5}, 0);
  CHECK(zero.codes.at(5) >= 0);
  CHECK(zero.codes.size() == 1);
}

TEST_CASE("frequency encoding with an infinite cutoff equals percentile encoding") {
  SplitMix64 gen(23);
  std::vector<std::int64_t> values;
  for (int i = 0; i < 2000; ++i) values.push_back(static_cast<std::int64_t>(gen.next_below(40)));
  EncodingTable freq = fit_frequency_encoding(FlowFeature::bytes, values,
                                              std::numeric_limits<std::int64_t>::max());
  EncodingTable perc = fit_percentile_encoding(FlowFeature::bytes, values);
  CHECK(freq.codes == perc.codes);
  CHECK(freq.bin_codes == perc.bin_codes);
}

TEST_CASE("encode_value: exact lookup and fallbacks") {
  std::vector<std::int64_t> values = {10, 10, 10, 10, 10, 20, 20, 20, 20, 90};
  EncodingTable perc = fit_percentile_encoding(FlowFeature::bytes, values);
  REQUIRE(perc.edges == BinEdges{10, 20});
  CHECK(encode_value(perc, 10) == perc.codes.at(10));
  CHECK(encode_value(perc, 20) == perc.codes.at(20));
  // unseen mid-bin value falls back to its bin's code
  CHECK(encode_value(perc, 15) == perc.codes.at(20));
  CHECK(encode_value(perc, 55) == perc.codes.at(90));

  // contextual: unseen value -> nearest centroid to the zero vector
  std::vector<FlowRecord> flows;
  auto big = byte_sequence(std::vector<std::int64_t>(500, 10), "a", "b");
  flows.insert(flows.end(), big.begin(), big.end());
  auto small = byte_sequence({20}, "c", "d");
  flows.insert(flows.end(), small.begin(), small.end());
  EncodingTable ctx = fit_contextual_encoding(FlowFeature::bytes, group_by_connection(flows), 2, 3);
  // 20 has the zero vector, so an unseen value must share its code
  CHECK(encode_value(ctx, 999) == ctx.codes.at(20));
}

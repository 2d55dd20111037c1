#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <tuple>
#include <vector>

namespace flowsm {

enum class Label { benign, malicious, unknown };

/// One NetFlow entry in canonical form. Durations are integer milliseconds.
struct FlowRecord {
  std::int64_t timestamp = 0;    // epoch milliseconds
  std::int64_t duration_ms = 0;  // >= 0
  std::string protocol;          // non-empty token, e.g. "TCP"
  std::string src;               // endpoint identifier (IP or hostname)
  std::string dst;
  std::int64_t bytes = 0;  // >= 0
  Label label = Label::unknown;

  bool operator==(const FlowRecord&) const = default;
};

/// Directional connection identity: (a,b) and (b,a) are distinct keys.
struct ConnectionKey {
  std::string src;
  std::string dst;

  bool operator==(const ConnectionKey&) const = default;
  bool operator<(const ConnectionKey& o) const {
    return std::tie(src, dst) < std::tie(o.src, o.dst);
  }
};

/// Maps canonical fields onto the columns of a delimited text file.
/// A column is addressed by header name, or by a decimal 0-based index
/// string when the file has no header (an all-digits name is always
/// treated as an index).
struct ColumnMap {
  std::string timestamp = "timestamp";
  std::string duration = "duration_ms";
  std::string protocol = "protocol";
  std::string src = "src";
  std::string dst = "dst";
  std::string bytes = "bytes";
  std::optional<std::string> label = "label";  // nullopt: no label column
  std::string timestamp_format = "epoch_ms";   // epoch_ms | epoch_s
  std::string duration_unit = "ms";            // ms | s
  char delimiter = ',';
  bool header = true;

  /// The canonical CSV layout: timestamp,duration_ms,protocol,src,dst,bytes,label.
  static ColumnMap canonical() { return ColumnMap{}; }

  /// key=value file, one entry per line, '#' comments allowed.
  static ColumnMap from_config_file(const std::string& path);

  void apply(const std::string& key, const std::string& value);
  /// One "key=value" entry, the same grammar as the config file lines.
  void apply_entry(const std::string& entry);
};

struct ParseResult {
  std::vector<FlowRecord> records;
  std::size_t skipped = 0;     // data rows dropped because a canonical field failed to parse
  std::size_t total_rows = 0;  // data rows seen (header and comments excluded)
  std::size_t first_bad_line = 0;
  std::string first_bad_row;
};

/// Parses delimited text into flow records, in file order. Rows with
/// unparseable canonical fields are skipped and counted. Throws DataError
/// when the stream is unreadable or when more than half of the data rows
/// are skipped (which signals a wrong ColumnMap).
ParseResult parse_flows(std::istream& in, const ColumnMap& map);
ParseResult parse_flows_file(const std::string& path, const ColumnMap& map);

/// Writes canonical CSV. `preamble` lines (already '#'-prefixed) go first.
void serialize_flows(std::ostream& out, const std::vector<FlowRecord>& flows,
                     const std::string& preamble = "");
void serialize_flows_file(const std::string& path, const std::vector<FlowRecord>& flows,
                          const std::string& preamble = "");

using ConnectionMap = std::map<ConnectionKey, std::vector<FlowRecord>>;

/// Groups flows by directional (src,dst) key; within a key, flows are
/// sorted by timestamp ascending with input order breaking ties.
ConnectionMap group_by_connection(const std::vector<FlowRecord>& flows);

std::string label_to_string(Label l);   // "0" | "1" | ""
Label label_from_string(const std::string& s);  // throws DataError on junk

}  // namespace flowsm

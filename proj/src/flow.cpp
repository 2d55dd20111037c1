#include "flowsm/flow.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "flowsm/errors.hpp"

namespace flowsm {

namespace {

std::string trim(const std::string& s) {
  std::size_t b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  std::size_t e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& line, char delim) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    std::size_t pos = line.find(delim, start);
    if (pos == std::string::npos) {
      out.push_back(line.substr(start));
      break;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
  return out;
}

bool parse_int(const std::string& s, std::int64_t& out) {
  std::string t = trim(s);
  if (t.empty()) return false;
  auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), out);
  return ec == std::errc() && ptr == t.data() + t.size();
}

bool parse_double(const std::string& s, double& out) {
  std::string t = trim(s);
  if (t.empty()) return false;
  try {
    std::size_t used = 0;
    out = std::stod(t, &used);
    return used == t.size() && std::isfinite(out);
  } catch (...) {
    return false;
  }
}

struct ResolvedColumns {
  std::size_t timestamp, duration, protocol, src, dst, bytes;
  std::optional<std::size_t> label;
};

bool all_digits(const std::string& s) {
  return !s.empty() && std::all_of(s.begin(), s.end(), [](char c) { return c >= '0' && c <= '9'; });
}

std::size_t resolve_one(const std::string& name, const std::vector<std::string>& header,
                        bool has_header) {
  if (all_digits(name)) {
    return static_cast<std::size_t>(std::stoull(name));
  }
  if (!has_header) {
    throw ConfigError("column '" + name + "' is not an index and the file has no header");
  }
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (trim(header[i]) == name) return i;
  }
  throw ConfigError("column '" + name + "' not found in header");
}

ResolvedColumns resolve_columns(const ColumnMap& map, const std::vector<std::string>& header) {
  ResolvedColumns r{};
  r.timestamp = resolve_one(map.timestamp, header, map.header);
  r.duration = resolve_one(map.duration, header, map.header);
  r.protocol = resolve_one(map.protocol, header, map.header);
  r.src = resolve_one(map.src, header, map.header);
  r.dst = resolve_one(map.dst, header, map.header);
  r.bytes = resolve_one(map.bytes, header, map.header);
  if (map.label) r.label = resolve_one(*map.label, header, map.header);
  return r;
}

// Returns false when any canonical field fails to parse.
bool parse_row(const std::vector<std::string>& fields, const ResolvedColumns& cols,
               const ColumnMap& map, FlowRecord& rec) {
  std::size_t needed = std::max({cols.timestamp, cols.duration, cols.protocol, cols.src, cols.dst,
                                 cols.bytes, cols.label.value_or(0)});
  if (fields.size() <= needed) return false;

  if (map.timestamp_format == "epoch_ms") {
    if (!parse_int(fields[cols.timestamp], rec.timestamp)) return false;
  } else if (map.timestamp_format == "epoch_s") {
    double secs = 0;
    if (!parse_double(fields[cols.timestamp], secs)) return false;
    rec.timestamp = std::llround(secs * 1000.0);
  } else {
    throw ConfigError("unknown timestamp_format '" + map.timestamp_format + "'");
  }

  if (map.duration_unit == "ms") {
    if (!parse_int(fields[cols.duration], rec.duration_ms)) return false;
  } else if (map.duration_unit == "s") {
    double secs = 0;
    if (!parse_double(fields[cols.duration], secs)) return false;
    rec.duration_ms = std::llround(secs * 1000.0);
  } else {
    throw ConfigError("unknown duration_unit '" + map.duration_unit + "'");
  }
  if (rec.duration_ms < 0) return false;

  rec.protocol = trim(fields[cols.protocol]);
  if (rec.protocol.empty()) return false;

  rec.src = trim(fields[cols.src]);
  rec.dst = trim(fields[cols.dst]);
  if (rec.src.empty() || rec.dst.empty()) return false;

  if (!parse_int(fields[cols.bytes], rec.bytes) || rec.bytes < 0) return false;

  rec.label = Label::unknown;
  if (cols.label) {
    std::string l = trim(fields[*cols.label]);
    if (l.empty()) {
      rec.label = Label::unknown;
    } else if (l == "0") {
      rec.label = Label::benign;
    } else if (l == "1") {
      rec.label = Label::malicious;
    } else {
      return false;
    }
  }
  return true;
}

}  // namespace

std::string label_to_string(Label l) {
  switch (l) {
    case Label::benign: return "0";
    case Label::malicious: return "1";
    default: return "";
  }
}

Label label_from_string(const std::string& s) {
  std::string t = trim(s);
  if (t.empty()) return Label::unknown;
  if (t == "0") return Label::benign;
  if (t == "1") return Label::malicious;
  throw DataError("bad label '" + s + "'");
}

void ColumnMap::apply(const std::string& key, const std::string& value) {
  if (key == "timestamp") timestamp = value;
  else if (key == "duration") duration = value;
  else if (key == "protocol") protocol = value;
  else if (key == "src") src = value;
  else if (key == "dst") dst = value;
  else if (key == "bytes") bytes = value;
  else if (key == "label") label = value;
  else if (key == "timestamp_format") timestamp_format = value;
  else if (key == "duration_unit") duration_unit = value;
  else if (key == "delimiter") {
    if (value.size() != 1) throw ConfigError("delimiter must be a single character");
    delimiter = value[0];
  } else if (key == "header") {
    if (value == "true" || value == "1") header = true;
    else if (value == "false" || value == "0") header = false;
    else throw ConfigError("header must be true or false");
  } else {
    throw ConfigError("unknown column map key: " + key);
  }
}

void ColumnMap::apply_entry(const std::string& entry) {
  std::size_t eq = entry.find('=');
  if (eq == std::string::npos) throw ConfigError("bad column map entry: " + entry);
  apply(trim(entry.substr(0, eq)), trim(entry.substr(eq + 1)));
}

ColumnMap ColumnMap::from_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open column map file: " + path);
  ColumnMap map;
  map.label = std::nullopt;
  std::string line;
  while (std::getline(in, line)) {
    line = trim(line);
    if (line.empty() || line[0] == '#') continue;
    map.apply_entry(line);
  }
  return map;
}

ParseResult parse_flows(std::istream& in, const ColumnMap& map) {
  if (!in.good()) throw DataError("unreadable input stream");

  ParseResult result;
  std::string line;
  std::optional<ResolvedColumns> cols;
  std::vector<std::string> header;
  std::size_t line_no = 0;

  while (std::getline(in, line)) {
    ++line_no;
    if (line_no == 1 && line.rfind("\xEF\xBB\xBF", 0) == 0) line.erase(0, 3);  // UTF-8 BOM
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line[0] == '#') continue;

    if (!cols) {
      if (map.header) {
        header = split(line, map.delimiter);
        cols = resolve_columns(map, header);
        continue;
      }
      cols = resolve_columns(map, {});
    }

    ++result.total_rows;
    std::vector<std::string> fields = split(line, map.delimiter);
    FlowRecord rec;
    if (parse_row(fields, *cols, map, rec)) {
      result.records.push_back(std::move(rec));
    } else {
      ++result.skipped;
      if (result.first_bad_row.empty()) {
        result.first_bad_row = line;
        result.first_bad_line = line_no;
      }
    }
  }
  if (in.bad()) throw DataError("I/O error while reading input");

  if (result.total_rows > 0 && result.skipped * 2 > result.total_rows) {
    std::ostringstream msg;
    msg << "more than half of the rows (" << result.skipped << "/" << result.total_rows
        << ") failed to parse; wrong column map? first bad row (line " << result.first_bad_line
        << "): " << result.first_bad_row;
    throw DataError(msg.str());
  }
  return result;
}

ParseResult parse_flows_file(const std::string& path, const ColumnMap& map) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open input file: " + path);
  return parse_flows(in, map);
}

void serialize_flows(std::ostream& out, const std::vector<FlowRecord>& flows,
                     const std::string& preamble) {
  if (!preamble.empty()) out << preamble;
  out << "timestamp,duration_ms,protocol,src,dst,bytes,label\n";
  for (const FlowRecord& f : flows) {
    out << f.timestamp << ',' << f.duration_ms << ',' << f.protocol << ',' << f.src << ','
        << f.dst << ',' << f.bytes << ',' << label_to_string(f.label) << '\n';
  }
}

void serialize_flows_file(const std::string& path, const std::vector<FlowRecord>& flows,
                          const std::string& preamble) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write file: " + path);
  serialize_flows(out, flows, preamble);
}

ConnectionMap group_by_connection(const std::vector<FlowRecord>& flows) {
  ConnectionMap grouped;
  for (const FlowRecord& f : flows) {
    grouped[ConnectionKey{f.src, f.dst}].push_back(f);
  }
  for (auto& [key, seq] : grouped) {
    std::stable_sort(seq.begin(), seq.end(),
                     [](const FlowRecord& a, const FlowRecord& b) { return a.timestamp < b.timestamp; });
  }
  return grouped;
}

}  // namespace flowsm

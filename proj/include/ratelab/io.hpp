#pragma once

// CSV ingestion of rating logs under a configurable column mapping, and the
// canonical export format.

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <istream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "ratelab/dataset.hpp"
#include "ratelab/error.hpp"
#include "ratelab/table.hpp"

namespace ratelab {

/// Reads one CSV record (RFC 4180 quoting; quoted fields may span lines).
/// Returns false at end of input.
inline bool read_csv_record(std::istream& is, std::vector<std::string>& fields, std::size_t& line_no) {
  fields.clear();
  std::string line;
  if (!std::getline(is, line)) return false;
  ++line_no;
  std::string field;
  bool quoted = false;
  for (std::size_t i = 0;; ++i) {
    if (i == line.size()) {
      if (quoted) {  // embedded newline
        std::string more;
        if (!std::getline(is, more)) throw DataError("line " + std::to_string(line_no) + ": unterminated quoted field");
        ++line_no;
        field += '\n';
        line = more;
        i = static_cast<std::size_t>(-1);
        continue;
      }
      break;
    }
    const char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          field += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        field += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.push_back(std::move(field));
      field.clear();
    } else if (c != '\r' || i + 1 != line.size()) {
      field += c;
    }
  }
  fields.push_back(std::move(field));
  return true;
}

/// How a source CSV maps onto RatingRecord fields.
struct ColumnMapping {
  // record field -> source column; optional fields are used only when their
  // column exists in the file
  std::map<std::string, std::string> columns{{"user_id", "user_id"},     {"item_id", "item_id"},
                                             {"rating", "rating"},       {"timestamp", "timestamp"},
                                             {"treatment", "treatment"}, {"period", "period"},
                                             {"recommender_class", "recommender_class"}};
  std::map<std::string, Rating> rating_values{{"0", Rating::dislike}, {"1", Rating::like}, {"2", Rating::superlike}};
  std::map<std::string, Treatment> treatment_values{{"a", Treatment::a}, {"b", Treatment::b}, {"c", Treatment::c}};
  std::map<std::string, Period> period_values{{"pre_timers", Period::pre_timers}, {"post_timers", Period::post_timers}};
  std::map<std::string, RecommenderClass> class_values{{"personalized", RecommenderClass::personalized},
                                                       {"random", RecommenderClass::random},
                                                       {"1", RecommenderClass::personalized},
                                                       {"0", RecommenderClass::random},
                                                       {"True", RecommenderClass::personalized},
                                                       {"False", RecommenderClass::random}};
  std::string timestamp_format = "epoch";  // or a strftime pattern read as UTC

  static constexpr std::array<std::string_view, 4> mandatory{"user_id", "item_id", "rating", "timestamp"};
  static constexpr std::array<std::string_view, 3> optional_fields{"treatment", "period", "recommender_class"};

  void validate() const {
    for (auto f : mandatory)
      if (!columns.contains(std::string(f))) throw ConfigError("column mapping lacks mandatory field '" + std::string(f) + "'");
    for (const auto& [field, col] : columns) {
      const bool known = std::find(mandatory.begin(), mandatory.end(), field) != mandatory.end() ||
                         std::find(optional_fields.begin(), optional_fields.end(), field) != optional_fields.end();
      if (!known) throw ConfigError("column mapping names unknown field '" + field + "'");
    }
  }

  /// Overlays the "columns" config section on the defaults. Value tables given
  /// in the section replace the default tables.
  static ColumnMapping from_json(const nlohmann::json& j) {
    ColumnMapping m;
    if (!j.is_object()) throw ConfigError("'columns' section must be an object");
    auto value_table = [](const nlohmann::json& t, auto parse) {
      if (!t.is_object()) throw ConfigError("value recoding tables must be objects");
      std::map<std::string, decltype(parse(nlohmann::json{}))> out;
      for (const auto& [k, v] : t.items()) out[k] = parse(v);
      return out;
    };
    for (const auto& [key, v] : j.items()) {
      if (key == "timestamp_format") {
        m.timestamp_format = v.get<std::string>();
      } else if (key == "rating_values") {
        m.rating_values = value_table(v, [](const nlohmann::json& x) {
          const int code = x.get<int>();
          if (code < 0 || code > 2) throw ConfigError("rating_values entries must be 0, 1 or 2");
          return rating_from_int(code);
        });
      } else if (key == "treatment_values") {
        m.treatment_values = value_table(v, [](const nlohmann::json& x) { return parse_treatment(x.get<std::string>()); });
      } else if (key == "period_values") {
        m.period_values = value_table(v, [](const nlohmann::json& x) {
          const auto s = x.get<std::string>();
          if (s == "pre_timers") return Period::pre_timers;
          if (s == "post_timers") return Period::post_timers;
          throw ConfigError("unknown period '" + s + "'");
        });
      } else if (key == "recommender_class_values") {
        m.class_values = value_table(v, [](const nlohmann::json& x) {
          const auto s = x.get<std::string>();
          if (s == "personalized") return RecommenderClass::personalized;
          if (s == "random") return RecommenderClass::random;
          throw ConfigError("unknown recommender class '" + s + "'");
        });
      } else if (v.is_null()) {
        m.columns.erase(key);
      } else {
        m.columns[key] = v.get<std::string>();
      }
    }
    m.validate();
    return m;
  }
};

struct Reject {
  std::size_t line = 0;
  std::string reason;
  std::string raw;
};

struct IngestResult {
  Dataset dataset;
  std::size_t rows_read = 0;
  std::vector<Reject> rejects;
};

namespace detail {

inline std::optional<std::int64_t> parse_timestamp(const std::string& s, const std::string& format) {
  if (format == "epoch") {
    std::int64_t v = 0;
    const auto* end = s.data() + s.size();
    auto [ptr, ec] = std::from_chars(s.data(), end, v);
    if (ec == std::errc{} && ptr == end) return v;
    double d = 0.0;  // tolerate "1600000000.0"
    auto [p2, e2] = std::from_chars(s.data(), end, d);
    if (e2 == std::errc{} && p2 == end && std::isfinite(d)) return static_cast<std::int64_t>(std::floor(d));
    return std::nullopt;
  }
  std::tm tm{};
  std::istringstream ss(s);
  ss >> std::get_time(&tm, format.c_str());
  if (ss.fail()) return std::nullopt;
  return static_cast<std::int64_t>(timegm(&tm));
}

template <class T>
std::optional<T> lookup(const std::map<std::string, T>& table, const std::string& key) {
  const auto it = table.find(key);
  if (it == table.end()) return std::nullopt;
  return it->second;
}

inline std::string join_fields(const std::vector<std::string>& f) {
  std::string out;
  for (std::size_t i = 0; i < f.size(); ++i) {
    if (i) out += ',';
    out += csv_escape(f[i]);
  }
  return out;
}

}  // namespace detail

/// Streams a CSV with a header row into a Dataset. Rows that cannot be mapped
/// are collected in `rejects` with a reason instead of aborting.
inline IngestResult ingest_csv(std::istream& is, const ColumnMapping& mapping) {
  mapping.validate();
  std::vector<std::string> fields;
  std::size_t line_no = 0;
  if (!read_csv_record(is, fields, line_no)) throw DataError("input has no header row");
  if (!fields.empty() && fields[0].starts_with("\xEF\xBB\xBF")) fields[0].erase(0, 3);  // BOM

  std::map<std::string, std::size_t> header;
  for (std::size_t i = 0; i < fields.size(); ++i) header[fields[i]] = i;
  std::map<std::string, std::size_t> pos;  // record field -> column position
  for (const auto& [field, col] : mapping.columns) {
    const auto h = header.find(col);
    const bool is_mandatory = std::find(ColumnMapping::mandatory.begin(), ColumnMapping::mandatory.end(), field) !=
                              ColumnMapping::mandatory.end();
    if (h == header.end()) {
      if (is_mandatory) throw ConfigError("mandatory field '" + field + "' maps to column '" + col + "', which the header lacks");
      continue;
    }
    pos[field] = h->second;
  }

  IngestResult out;
  std::vector<RatingRecord> records;
  const std::size_t width = header.size();
  while (true) {
    const std::size_t start_line = line_no + 1;
    if (!read_csv_record(is, fields, line_no)) break;
    if (fields.size() == 1 && fields[0].empty()) continue;  // blank line
    ++out.rows_read;
    auto reject = [&](std::string reason) { out.rejects.push_back({start_line, std::move(reason), detail::join_fields(fields)}); };
    if (fields.size() != width) {
      reject("expected " + std::to_string(width) + " fields, found " + std::to_string(fields.size()));
      continue;
    }
    RatingRecord r;
    r.user_id = fields[pos.at("user_id")];
    r.item_id = fields[pos.at("item_id")];
    if (r.user_id.empty() || r.item_id.empty()) {
      reject("empty user or item id");
      continue;
    }
    const auto rating = detail::lookup(mapping.rating_values, fields[pos.at("rating")]);
    if (!rating) {
      reject("unmapped rating value");
      continue;
    }
    r.rating = *rating;
    const auto ts = detail::parse_timestamp(fields[pos.at("timestamp")], mapping.timestamp_format);
    if (!ts) {
      reject("unparseable timestamp");
      continue;
    }
    r.timestamp = *ts;
    bool ok = true;
    if (pos.contains("treatment")) {
      r.treatment = detail::lookup(mapping.treatment_values, fields[pos.at("treatment")]);
      if (!r.treatment) reject("unmapped treatment value"), ok = false;
    }
    if (ok && pos.contains("period")) {
      r.period = detail::lookup(mapping.period_values, fields[pos.at("period")]);
      if (!r.period) reject("unmapped period value"), ok = false;
    }
    if (ok && pos.contains("recommender_class")) {
      r.recommender_class = detail::lookup(mapping.class_values, fields[pos.at("recommender_class")]);
      if (!r.recommender_class) reject("unmapped recommender_class value"), ok = false;
    }
    if (ok) records.push_back(std::move(r));
  }
  out.dataset = Dataset(std::move(records));
  return out;
}

inline IngestResult ingest_csv(const std::string& path, const ColumnMapping& mapping) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot read '" + path + "'");
  return ingest_csv(is, mapping);
}

inline void write_rejects(const std::vector<Reject>& rejects, const std::string& path) {
  Table t{{"line", "reason", "raw"}, {}};
  for (const auto& r : rejects) t.add_row({std::to_string(r.line), r.reason, r.raw});
  t.write_csv(path);
}

/// Canonical export: user_id,item_id,rating,timestamp plus whichever optional
/// fields the dataset carries. Reads back losslessly under the default mapping.
inline void write_dataset_csv(const Dataset& ds, std::ostream& os) {
  Table t{{"user_id", "item_id", "rating", "timestamp"}, {}};
  if (ds.has_treatment()) t.header.push_back("treatment");
  if (ds.has_period()) t.header.push_back("period");
  if (ds.has_recommender_class()) t.header.push_back("recommender_class");
  for (const auto& r : ds.records()) {
    std::vector<std::string> row{r.user_id, r.item_id, std::to_string(to_int(r.rating)), std::to_string(r.timestamp)};
    if (r.treatment) row.emplace_back(to_string(*r.treatment));
    if (r.period) row.emplace_back(to_string(*r.period));
    if (r.recommender_class) row.emplace_back(to_string(*r.recommender_class));
    t.add_row(std::move(row));
  }
  t.write_csv(os);
}

inline void write_dataset_csv(const Dataset& ds, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open '" + path + "' for writing");
  write_dataset_csv(ds, os);
}

}  // namespace ratelab

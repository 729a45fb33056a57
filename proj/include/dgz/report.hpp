#pragma once

#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "dgz/error.hpp"
#include "dgz/metrics.hpp"

namespace dgz {

// Fixed CSV schema for the scalar metrics. The header is part of the public
// contract: downstream tooling keys on these column names.
inline const char* kReportCsvHeader = "a_u,a_s,h,t1,cmmd,cacd,a_is,a_iu";

namespace detail {

// 17 significant digits round-trip any IEEE double exactly, which keeps the
// CSV export both parseable back to the same value and byte-stable.
inline std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace detail

inline nlohmann::ordered_json report_to_json(const MetricsReport& r) {
  nlohmann::ordered_json j;
  j["a_u"] = r.a_u;
  j["a_s"] = r.a_s;
  j["h"] = r.h;
  j["t1"] = r.t1;
  j["cmmd"] = r.cmmd;
  j["cacd"] = r.cacd;
  j["a_is"] = r.a_is;
  j["a_iu"] = r.a_iu;
  return j;
}

inline MetricsReport report_from_json(const nlohmann::json& j) {
  MetricsReport r;
  try {
    r.a_u = j.at("a_u").get<double>();
    r.a_s = j.at("a_s").get<double>();
    r.h = j.at("h").get<double>();
    r.t1 = j.at("t1").get<double>();
    r.cmmd = j.at("cmmd").get<double>();
    r.cacd = j.at("cacd").get<double>();
    r.a_is = j.at("a_is").get<double>();
    r.a_iu = j.at("a_iu").get<double>();
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("report: bad JSON: ") + e.what());
  }
  return r;
}

inline std::string report_csv_row(const MetricsReport& r) {
  std::string row;
  const double vals[] = {r.a_u, r.a_s, r.h, r.t1, r.cmmd, r.cacd, r.a_is, r.a_iu};
  for (double v : vals) {
    if (!row.empty()) row += ',';
    row += detail::format_double(v);
  }
  return row;
}

inline MetricsReport report_from_csv(const std::string& header, const std::string& row) {
  if (header != kReportCsvHeader) throw FormatError("report: unexpected CSV header: " + header);
  std::vector<double> vals;
  std::size_t start = 0;
  while (start <= row.size()) {
    const std::size_t comma = row.find(',', start);
    const std::string cell = row.substr(start, comma == std::string::npos ? std::string::npos : comma - start);
    try {
      std::size_t pos = 0;
      vals.push_back(std::stod(cell, &pos));
      if (pos != cell.size()) throw FormatError("");
    } catch (...) {
      throw FormatError("report: bad CSV cell '" + cell + "'");
    }
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  if (vals.size() != 8) throw FormatError("report: expected 8 CSV columns");
  MetricsReport r;
  r.a_u = vals[0];
  r.a_s = vals[1];
  r.h = vals[2];
  r.t1 = vals[3];
  r.cmmd = vals[4];
  r.cacd = vals[5];
  r.a_is = vals[6];
  r.a_iu = vals[7];
  return r;
}

// Writes <stem>.json, <stem>.csv, and (when per-class rows are present)
// <stem>_per_class.csv. Serialization is canonical: the same report always
// produces the same bytes.
inline void export_report(const MetricsReport& r, const std::string& stem) {
  {
    std::ofstream out(stem + ".json");
    if (!out) throw FormatError("cannot open for writing: " + stem + ".json");
    out << report_to_json(r).dump(2) << '\n';
    if (!out) throw FormatError("write failed: " + stem + ".json");
  }
  {
    std::ofstream out(stem + ".csv");
    if (!out) throw FormatError("cannot open for writing: " + stem + ".csv");
    out << kReportCsvHeader << '\n' << report_csv_row(r) << '\n';
    if (!out) throw FormatError("write failed: " + stem + ".csv");
  }
  if (!r.per_class.empty()) {
    std::ofstream out(stem + "_per_class.csv");
    if (!out) throw FormatError("cannot open for writing: " + stem + "_per_class.csv");
    out << "class_id,seen,accuracy,count\n";
    for (const PerClassAccuracyRow& row : r.per_class)
      out << row.class_id << ',' << (row.seen ? 1 : 0) << ',' << detail::format_double(row.accuracy)
          << ',' << row.count << '\n';
    if (!out) throw FormatError("write failed: " + stem + "_per_class.csv");
  }
}

inline MetricsReport import_report(const std::string& stem) {
  std::ifstream in(stem + ".json");
  if (!in) throw FormatError("cannot open: " + stem + ".json");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(stem + ".json: bad JSON: " + e.what());
  }
  return report_from_json(j);
}

// Generic table writer for sweep/plot data: a fixed header plus numeric rows,
// formatted canonically. Used for figure-style curve exports.
inline void write_table_csv(const std::string& path, const std::vector<std::string>& columns,
                            const std::vector<std::vector<double>>& rows) {
  std::ofstream out(path);
  if (!out) throw FormatError("cannot open for writing: " + path);
  for (std::size_t i = 0; i < columns.size(); ++i) out << (i ? "," : "") << columns[i];
  out << '\n';
  for (const auto& row : rows) {
    if (row.size() != columns.size()) throw ContractError("table: row width != column count");
    for (std::size_t i = 0; i < row.size(); ++i)
      out << (i ? "," : "") << detail::format_double(row[i]);
    out << '\n';
  }
  if (!out) throw FormatError("write failed: " + path);
}

}  // namespace dgz

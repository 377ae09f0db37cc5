#pragma once

// Plain-text file formats: CSV tables (datasets, draws, summaries) and JSON
// sidecars. Numbers are written in shortest round-trip form so repeated runs
// produce identical bytes.

#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>
#include <system_error>
#include <vector>

#include <json.hpp>

#include "latentdlm/error.hpp"
#include "latentdlm/simulation.hpp"

namespace latentdlm {

using Json = nlohmann::ordered_json;

inline std::string format_number(double v) {
  if (std::isnan(v)) return "NA";
  if (std::isinf(v)) return v > 0 ? "Inf" : "-Inf";
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

inline bool is_missing_token(const std::string& s) {
  return s.empty() || s == "NA" || s == "NaN" || s == "nan" || s == "na" || s == "null";
}

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

inline std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream ss(line);
  while (std::getline(ss, field, sep)) out.push_back(trim(field));
  if (!line.empty() && line.back() == sep) out.emplace_back();
  return out;
}

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  std::string source;

  std::size_t column_index(const std::string& name) const {
    for (std::size_t j = 0; j < header.size(); ++j)
      if (header[j] == name) return j;
    throw ValidationError(source + ": missing column '" + name + "'");
  }

  bool has_column(const std::string& name) const {
    for (const auto& h : header)
      if (h == name) return true;
    return false;
  }

  /// Numeric column with missing tokens mapped to NaN.
  std::vector<double> numeric(const std::string& name) const {
    const std::size_t j = column_index(name);
    std::vector<double> out(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
      const std::string& cell = rows[i][j];
      if (is_missing_token(cell)) {
        out[i] = std::numeric_limits<double>::quiet_NaN();
        continue;
      }
      double v = 0.0;
      const auto res = std::from_chars(cell.data(), cell.data() + cell.size(), v);
      if (res.ec != std::errc() || res.ptr != cell.data() + cell.size())
        throw ValidationError(source + ": column '" + name + "', row " + std::to_string(i + 1) +
                              ": cannot parse '" + cell + "' as a number");
      out[i] = v;
    }
    return out;
  }
};

inline CsvTable read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open '" + path + "'");
  CsvTable t;
  t.source = path;
  std::string line;
  if (!std::getline(in, line)) throw ValidationError(path + ": empty file");
  if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);
  t.header = split(line, ',');
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    auto fields = split(line, ',');
    if (fields.size() != t.header.size())
      throw ValidationError(path + ": line " + std::to_string(lineno) + " has " + std::to_string(fields.size()) +
                            " fields, header has " + std::to_string(t.header.size()));
    t.rows.push_back(std::move(fields));
  }
  return t;
}

class CsvWriter {
 public:
  explicit CsvWriter(const std::string& path) : out_(path, std::ios::binary), path_(path) {
    if (!out_) throw ValidationError("cannot write '" + path + "'");
  }

  void row(const std::vector<std::string>& fields) {
    for (std::size_t j = 0; j < fields.size(); ++j) {
      if (j) out_ << ',';
      out_ << fields[j];
    }
    out_ << '\n';
  }

 private:
  std::ofstream out_;
  std::string path_;
};

inline void write_json(const std::string& path, const Json& j) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot write '" + path + "'");
  out << j.dump(2) << '\n';
}

inline Json read_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open '" + path + "'");
  try {
    return Json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(path + ": malformed JSON: " + e.what());
  }
}

// ---------------------------------------------------------------------------
// Simulated datasets

/// Columns: y, static_1.., dyn_<name>.. ; n + tau rows in time order, the
/// first tau of which are history only (blank y and statics).
inline void write_dataset_csv(const std::string& path, const SimDataset& data) {
  CsvWriter w(path);
  std::vector<std::string> header{"y"};
  for (const auto& s : data.statics) header.push_back(s.name);
  for (const auto& d : data.dynamics) header.push_back("dyn_" + d.name);
  w.row(header);
  const std::size_t hist = data.history();
  const std::size_t total = data.y.size() + hist;
  for (std::size_t r = 0; r < total; ++r) {
    std::vector<std::string> fields;
    const bool response = r >= hist;
    fields.push_back(response ? format_number(data.y[r - hist]) : "");
    for (const auto& s : data.statics) fields.push_back(response ? format_number(s.values[r - hist]) : "");
    for (const auto& d : data.dynamics) fields.push_back(format_number(d.values[r]));
    w.row(fields);
  }
}

inline Json to_json(const TruthRecord& t) {
  Json j;
  j["kind"] = to_string(t.kind);
  j["n"] = t.n;
  j["tau"] = t.tau;
  j["intercept"] = t.intercept;
  j["static_effects"] = t.static_effects;
  Json dyn = Json::array();
  for (const auto& d : t.dynamics) {
    Json e;
    e["name"] = d.name;
    e["effect"] = d.effect;
    e["shape"] = d.curve.shape;
    e["weights"] = d.curve.weights;
    dyn.push_back(e);
  }
  j["dynamics"] = dyn;
  j["xi"] = t.xi;
  j["q"] = t.q;
  j["seed"] = t.seed;
  j["dynamic_source"] = t.dynamic_source;
  j["ar_coefficient"] = t.ar_coefficient;
  return j;
}

inline TruthRecord truth_from_json(const Json& j) {
  TruthRecord t;
  try {
    t.kind = parse_response_kind(j.at("kind").get<std::string>());
    t.n = j.at("n").get<std::size_t>();
    t.tau = j.at("tau").get<std::size_t>();
    t.intercept = j.at("intercept").get<double>();
    t.static_effects = j.at("static_effects").get<std::vector<double>>();
    for (const auto& e : j.at("dynamics")) {
      DynamicTruth d;
      d.name = e.at("name").get<std::string>();
      d.effect = e.at("effect").get<double>();
      d.curve.shape = e.at("shape").get<std::string>();
      d.curve.weights = e.at("weights").get<std::vector<double>>();
      t.dynamics.push_back(std::move(d));
    }
    t.xi = j.at("xi").get<double>();
    t.q = j.at("q").get<double>();
    t.seed = j.at("seed").get<std::uint64_t>();
    t.dynamic_source = j.at("dynamic_source").get<std::string>();
    t.ar_coefficient = j.at("ar_coefficient").get<double>();
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("truth record: ") + e.what());
  }
  return t;
}

}  // namespace latentdlm

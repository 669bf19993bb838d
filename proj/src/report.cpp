#include "latentgeo/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "latentgeo/errors.hpp"

using nlohmann::json;

namespace latentgeo::report {

const std::string* MetricReport::key(const std::string& name) const {
  for (const auto& [k, v] : keys) {
    if (k == name) return &v;
  }
  return nullptr;
}

MetricStat aggregate_values(const std::vector<double>& values) {
  MetricStat s;
  double sum = 0.0;
  for (double v : values) {
    if (!std::isfinite(v)) {
      s.excluded += 1;
      continue;
    }
    sum += v;
    s.n += 1;
  }
  if (s.n == 0) return s;
  s.mean = sum / static_cast<double>(s.n);
  double ss = 0.0;
  for (double v : values) {
    if (!std::isfinite(v)) continue;
    ss += (v - s.mean) * (v - s.mean);
  }
  if (s.n > 1) s.std_error = std::sqrt(ss / static_cast<double>(s.n - 1)) / std::sqrt(static_cast<double>(s.n));
  return s;
}

MetricReport make_report(std::vector<std::pair<std::string, std::string>> keys,
                         const std::map<std::string, std::vector<double>>& samples) {
  MetricReport r;
  r.keys = std::move(keys);
  for (const auto& [name, values] : samples) {
    r.metrics[name] = aggregate_values(values);
    r.n_triplets = std::max<std::int64_t>(r.n_triplets, static_cast<std::int64_t>(values.size()));
  }
  if (r.n_triplets == 0) throw ConfigError("make_report: no samples");
  return r;
}

MetricReport median_over_seeds(const std::vector<MetricReport>& rows) {
  if (rows.empty()) throw ConfigError("median_over_seeds: empty group");
  MetricReport out;
  for (const auto& [k, v] : rows.front().keys) {
    out.keys.emplace_back(k, k == "seed" ? "median" : v);
  }
  out.n_triplets = rows.front().n_triplets;
  for (const auto& [name, stat] : rows.front().metrics) {
    std::vector<double> means;
    for (const MetricReport& r : rows) means.push_back(r.metrics.at(name).mean);
    std::sort(means.begin(), means.end());
    MetricStat s;
    const std::size_t n = means.size();
    s.mean = n % 2 == 1 ? means[n / 2] : 0.5 * (means[n / 2 - 1] + means[n / 2]);
    s.n = static_cast<std::int64_t>(n);
    out.metrics[name] = s;
    (void)stat;
  }
  return out;
}

std::string format_g6(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

namespace {

struct Columns {
  std::vector<std::string> key_names;
  std::vector<std::string> metric_names;                 // alphabetical
  std::set<std::string> with_excluded;
};

Columns column_layout(const std::vector<MetricReport>& reports) {
  Columns c;
  for (const MetricReport& r : reports) {
    for (const auto& [k, v] : r.keys) {
      if (std::find(c.key_names.begin(), c.key_names.end(), k) == c.key_names.end()) c.key_names.push_back(k);
    }
    for (const auto& [name, stat] : r.metrics) {
      if (std::find(c.metric_names.begin(), c.metric_names.end(), name) == c.metric_names.end()) {
        c.metric_names.push_back(name);
      }
      if (stat.excluded > 0) c.with_excluded.insert(name);
    }
  }
  std::sort(c.metric_names.begin(), c.metric_names.end());
  return c;
}

void require_nonempty(const std::vector<MetricReport>& reports) {
  if (reports.empty()) throw ConfigError("export_report: empty report list, no file written");
}

}  // namespace

void export_csv(const std::vector<MetricReport>& reports, const std::string& path) {
  require_nonempty(reports);
  const Columns cols = column_layout(reports);
  std::ofstream out(path);
  if (!out) throw IoError("cannot open for write: " + path);

  for (const std::string& k : cols.key_names) out << k << ",";
  out << "n_triplets";
  for (const std::string& m : cols.metric_names) {
    out << "," << m << "," << m << "_se";
    if (cols.with_excluded.count(m)) out << "," << m << "_excluded";
  }
  out << "\n";

  for (const MetricReport& r : reports) {
    for (const std::string& k : cols.key_names) {
      const std::string* v = r.key(k);
      out << (v ? *v : "") << ",";
    }
    out << r.n_triplets;
    for (const std::string& m : cols.metric_names) {
      auto it = r.metrics.find(m);
      if (it == r.metrics.end()) {
        out << ",,";
        if (cols.with_excluded.count(m)) out << ",";
        continue;
      }
      out << "," << format_g6(it->second.mean) << "," << format_g6(it->second.std_error);
      if (cols.with_excluded.count(m)) out << "," << it->second.excluded;
    }
    out << "\n";
  }
  if (!out) throw IoError("write failed: " + path);
}

void export_json(const std::vector<MetricReport>& reports, const std::string& path) {
  require_nonempty(reports);
  json rows = json::array();
  for (const MetricReport& r : reports) {
    json row;
    json keys = json::object();
    for (const auto& [k, v] : r.keys) keys[k] = v;
    row["keys"] = std::move(keys);
    row["key_order"] = json::array();
    for (const auto& [k, v] : r.keys) row["key_order"].push_back(k);
    row["n_triplets"] = r.n_triplets;
    json metrics = json::object();
    for (const auto& [name, s] : r.metrics) {
      metrics[name] = {{"mean", s.mean}, {"std_error", s.std_error}, {"n", s.n}, {"excluded", s.excluded}};
    }
    row["metrics"] = std::move(metrics);
    rows.push_back(std::move(row));
  }
  std::ofstream out(path);
  if (!out) throw IoError("cannot open for write: " + path);
  out << rows.dump(2) << "\n";
  if (!out) throw IoError("write failed: " + path);
}

std::vector<MetricReport> load_report_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open: " + path);
  json rows;
  try {
    in >> rows;
  } catch (const json::exception& e) {
    throw IoError("malformed report json " + path + ": " + e.what());
  }
  std::vector<MetricReport> out;
  for (const json& row : rows) {
    MetricReport r;
    for (const json& k : row.at("key_order")) {
      const std::string name = k.get<std::string>();
      r.keys.emplace_back(name, row.at("keys").at(name).get<std::string>());
    }
    r.n_triplets = row.at("n_triplets").get<std::int64_t>();
    for (const auto& [name, s] : row.at("metrics").items()) {
      MetricStat stat;
      stat.mean = s.at("mean").get<double>();
      stat.std_error = s.at("std_error").get<double>();
      stat.n = s.at("n").get<std::int64_t>();
      stat.excluded = s.at("excluded").get<std::int64_t>();
      r.metrics[name] = stat;
    }
    out.push_back(std::move(r));
  }
  return out;
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      fields.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  fields.push_back(cur);
  return fields;
}

}  // namespace

std::vector<MetricReport> load_report_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open: " + path);
  std::string line;
  if (!std::getline(in, line)) throw IoError("report csv " + path + ": empty file");
  const std::vector<std::string> header = split_csv_line(line);
  const auto n_col = header.size();
  std::size_t n_keys = 0;
  while (n_keys < n_col && header[n_keys] != "n_triplets") ++n_keys;
  if (n_keys == n_col) throw IoError("report csv " + path + ": missing n_triplets column");

  std::vector<MetricReport> out;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const std::vector<std::string> fields = split_csv_line(line);
    if (fields.size() != n_col) throw IoError("report csv " + path + ": ragged row \"" + line + "\"");
    MetricReport r;
    for (std::size_t i = 0; i < n_keys; ++i) {
      if (!fields[i].empty()) r.keys.emplace_back(header[i], fields[i]);
    }
    r.n_triplets = std::stoll(fields[n_keys]);
    for (std::size_t i = n_keys + 1; i < n_col; ++i) {
      const std::string& col = header[i];
      if (fields[i].empty()) continue;
      if (col.size() > 3 && col.substr(col.size() - 3) == "_se") {
        r.metrics[col.substr(0, col.size() - 3)].std_error = std::stod(fields[i]);
      } else if (col.size() > 9 && col.substr(col.size() - 9) == "_excluded") {
        r.metrics[col.substr(0, col.size() - 9)].excluded = std::stoll(fields[i]);
      } else {
        r.metrics[col].mean = std::stod(fields[i]);
        r.metrics[col].n = r.n_triplets;
      }
    }
    out.push_back(std::move(r));
  }
  return out;
}

void export_raw_csv(const std::vector<RawRow>& rows, const std::string& path) {
  if (rows.empty()) throw ConfigError("export_raw_csv: no rows");
  std::vector<std::string> metric_names;
  for (const auto& [name, v] : rows.front().values) metric_names.push_back(name);

  std::ofstream out(path);
  if (!out) throw IoError("cannot open for write: " + path);
  out << "triplet_id,object_id,t1,t2,t3,kind";
  for (const std::string& m : metric_names) out << "," << m;
  out << "\n";
  char buf[64];
  for (const RawRow& r : rows) {
    out << r.triplet_id << "," << r.object_id;
    for (double t : {r.t1, r.t2, r.t3}) {
      std::snprintf(buf, sizeof(buf), "%.17g", t);
      out << "," << buf;
    }
    out << "," << r.kind;
    for (const std::string& m : metric_names) {
      std::snprintf(buf, sizeof(buf), "%.17g", r.values.at(m));
      out << "," << buf;
    }
    out << "\n";
  }
  if (!out) throw IoError("write failed: " + path);
}

std::vector<RawRow> load_raw_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open: " + path);
  std::string line;
  if (!std::getline(in, line)) throw IoError("raw csv " + path + ": empty file");
  const std::vector<std::string> header = split_csv_line(line);
  if (header.size() < 7 || header[0] != "triplet_id") {
    throw IoError("raw csv " + path + ": unexpected header");
  }
  std::vector<RawRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const std::vector<std::string> fields = split_csv_line(line);
    if (fields.size() != header.size()) throw IoError("raw csv " + path + ": ragged row");
    RawRow r;
    r.triplet_id = std::stoll(fields[0]);
    r.object_id = std::stoi(fields[1]);
    r.t1 = std::stod(fields[2]);
    r.t2 = std::stod(fields[3]);
    r.t3 = std::stod(fields[4]);
    r.kind = fields[5];
    for (std::size_t i = 6; i < header.size(); ++i) r.values[header[i]] = std::stod(fields[i]);
    rows.push_back(std::move(r));
  }
  return rows;
}

}  // namespace latentgeo::report

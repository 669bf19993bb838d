#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace latentgeo::report {

// One aggregated row: grouping keys plus per-metric mean and standard error.
// Infinite values (degenerate PSNR) are excluded from the aggregate with a
// recorded count.
struct MetricStat {
  double mean = 0.0;
  double std_error = 0.0;
  std::int64_t n = 0;
  std::int64_t excluded = 0;
};

struct MetricReport {
  std::vector<std::pair<std::string, std::string>> keys;  // ordered grouping keys
  std::map<std::string, MetricStat> metrics;              // ordered by metric name
  std::int64_t n_triplets = 0;

  const std::string* key(const std::string& name) const;
};

// Arithmetic mean with standard error sd/sqrt(n); non-finite samples are
// excluded and counted.
MetricStat aggregate_values(const std::vector<double>& values);

MetricReport make_report(std::vector<std::pair<std::string, std::string>> keys,
                         const std::map<std::string, std::vector<double>>& samples);

// Median over a group of rows that differ only in the `seed` key; the result
// carries seed="median". Standard errors are not propagated (set to 0).
MetricReport median_over_seeds(const std::vector<MetricReport>& rows);

// Stable column order: grouping keys first (union, in first-appearance
// order), then metrics alphabetically as <name>, <name>_se and, when any row
// excluded samples, <name>_excluded. Floats print with 6 significant digits.
void export_csv(const std::vector<MetricReport>& reports, const std::string& path);
void export_json(const std::vector<MetricReport>& reports, const std::string& path);
std::vector<MetricReport> load_report_csv(const std::string& path);
std::vector<MetricReport> load_report_json(const std::string& path);

// Raw per-triplet rows backing a report; full-precision values so the
// aggregate is exactly recomputable.
struct RawRow {
  std::int64_t triplet_id = 0;
  int object_id = 0;
  double t1 = 0.0, t2 = 0.0, t3 = 0.0;
  std::string kind;
  std::map<std::string, double> values;
};

void export_raw_csv(const std::vector<RawRow>& rows, const std::string& path);
std::vector<RawRow> load_raw_csv(const std::string& path);

std::string format_g6(double v);

}  // namespace latentgeo::report

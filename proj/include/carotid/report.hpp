#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "carotid/metrics.hpp"
#include "carotid/stats.hpp"

namespace carotid {

struct MeanSd {
  double mean = 0;
  double sd = 0;
  std::size_t n = 0;
};

/// Mean and sample sd of the finite values (NaNs are skipped).
MeanSd summarize(const std::vector<double>& values);

struct BoundarySummary {
  MeanSd dsc;
  MeanSd mad;
  MeanSd maxd;
  std::size_t missing_contours = 0;  ///< slices whose MAD/MAXD were undefined
};

BoundarySummary summarize_records(const std::vector<EvalRecord>& records, Boundary boundary);

/// Per-volume mean DSC for one boundary, keyed by volume id.
std::map<std::string, double> per_volume_dsc(const std::vector<EvalRecord>& records,
                                             Boundary boundary);

/// Markdown table: one row per setting, DSC (%) / MAD / MAXD (mm) as mean +/- sd
/// for MAB and LIB.
std::string metrics_table_markdown(
    const std::vector<std::pair<std::string, std::vector<EvalRecord>>>& settings);

void write_tukey_csv(const std::filesystem::path& path, const stats::TukeyResult& result);
std::string tukey_table_markdown(const std::vector<std::pair<std::string, std::string>>& pairs,
                                 const stats::TukeyResult& mab, const stats::TukeyResult& lib);

struct PairedColumns {
  std::vector<std::string> ids;
  std::vector<double> a;
  std::vector<double> b;
};

/// Reads two numeric columns (by header name) from a CSV with a header row.
/// The first column is taken as the row id.
PairedColumns read_paired_csv(const std::filesystem::path& path, const std::string& col_a,
                              const std::string& col_b);

std::string agreement_markdown(const stats::Correlation& r, const stats::BlandAltman& ba,
                               const std::string& units);

void write_text(const std::filesystem::path& path, const std::string& text);

}  // namespace carotid

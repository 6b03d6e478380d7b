#include "carotid/report.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace carotid {

MeanSd summarize(const std::vector<double>& values) {
  std::vector<double> finite;
  for (double v : values)
    if (std::isfinite(v)) finite.push_back(v);
  MeanSd s;
  s.n = finite.size();
  if (finite.empty()) {
    s.mean = s.sd = std::numeric_limits<double>::quiet_NaN();
    return s;
  }
  s.mean = stats::mean(finite);
  s.sd = finite.size() > 1 ? stats::sample_sd(finite) : 0.0;
  return s;
}

BoundarySummary summarize_records(const std::vector<EvalRecord>& records, Boundary boundary) {
  std::vector<double> d, m, x;
  BoundarySummary s;
  for (const auto& r : records) {
    if (r.boundary != boundary) continue;
    d.push_back(r.dsc);
    m.push_back(r.mad);
    x.push_back(r.maxd);
    if (!std::isfinite(r.mad)) ++s.missing_contours;
  }
  s.dsc = summarize(d);
  s.mad = summarize(m);
  s.maxd = summarize(x);
  return s;
}

std::map<std::string, double> per_volume_dsc(const std::vector<EvalRecord>& records,
                                             Boundary boundary) {
  std::map<std::string, std::pair<double, int>> acc;
  for (const auto& r : records) {
    if (r.boundary != boundary) continue;
    auto& a = acc[r.volume];
    a.first += r.dsc;
    ++a.second;
  }
  std::map<std::string, double> out;
  for (const auto& [k, v] : acc) out[k] = v.first / v.second;
  return out;
}

namespace {

std::string pm(const MeanSd& s, double scale, int digits) {
  char buf[64];
  if (s.n == 0) return "n/a";
  std::snprintf(buf, sizeof buf, "%.*f ± %.*f", digits, s.mean * scale, digits, s.sd * scale);
  return buf;
}

std::string pval(double p) {
  char buf[32];
  if (p < 1e-4) return "<0.0001";
  std::snprintf(buf, sizeof buf, "%.4f", p);
  return buf;
}

}  // namespace

std::string metrics_table_markdown(
    const std::vector<std::pair<std::string, std::vector<EvalRecord>>>& settings) {
  std::ostringstream os;
  os << "| Setting | MAB DSC (%) | MAB MAD (mm) | MAB MAXD (mm) | LIB DSC (%) | LIB MAD (mm) | "
        "LIB MAXD (mm) |\n";
  os << "|---|---|---|---|---|---|---|\n";
  for (const auto& [name, recs] : settings) {
    const auto mab = summarize_records(recs, Boundary::MAB);
    const auto lib = summarize_records(recs, Boundary::LIB);
    os << "| " << name << " | " << pm(mab.dsc, 100, 1) << " | " << pm(mab.mad, 1, 2) << " | "
       << pm(mab.maxd, 1, 2) << " | " << pm(lib.dsc, 100, 1) << " | " << pm(lib.mad, 1, 2)
       << " | " << pm(lib.maxd, 1, 2) << " |\n";
  }
  return os.str();
}

void write_tukey_csv(const std::filesystem::path& path, const stats::TukeyResult& result) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out.precision(10);
  out << "setting_a,setting_b,mean_diff,q,p\n";
  for (const auto& p : result.pairs) {
    out << p.group_a << ',' << p.group_b << ',' << p.mean_diff << ',' << p.q << ',' << p.p << '\n';
  }
}

std::string tukey_table_markdown(const std::vector<std::pair<std::string, std::string>>& pairs,
                                 const stats::TukeyResult& mab, const stats::TukeyResult& lib) {
  std::ostringstream os;
  os << "| Setting A | Setting B | p (MAB DSC) | p (LIB DSC) |\n|---|---|---|---|\n";
  for (const auto& [a, b] : pairs) {
    os << "| " << a << " | " << b << " | " << pval(stats::find_pair(mab, a, b).p) << " | "
       << pval(stats::find_pair(lib, a, b).p) << " |\n";
  }
  return os.str();
}

PairedColumns read_paired_csv(const std::filesystem::path& path, const std::string& col_a,
                              const std::string& col_b) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read " + path.string());
  auto split = [](const std::string& line) {
    std::vector<std::string> f;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) f.push_back(cell);
    return f;
  };
  std::string line;
  if (!std::getline(in, line)) throw FormatError("empty CSV " + path.string());
  const auto header = split(line);
  auto find = [&](const std::string& name) {
    for (std::size_t i = 0; i < header.size(); ++i)
      if (header[i] == name) return i;
    throw FormatError("column '" + name + "' not in " + path.string());
  };
  const auto ia = find(col_a);
  const auto ib = find(col_b);
  PairedColumns out;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto f = split(line);
    if (f.size() != header.size()) throw FormatError("ragged CSV row in " + path.string());
    try {
      out.ids.push_back(f[0]);
      out.a.push_back(std::stod(f[ia]));
      out.b.push_back(std::stod(f[ib]));
    } catch (const std::logic_error&) {
      throw FormatError("non-numeric value in " + path.string() + ": " + line);
    }
  }
  return out;
}

std::string agreement_markdown(const stats::Correlation& r, const stats::BlandAltman& ba,
                               const std::string& units) {
  char buf[512];
  std::snprintf(buf, sizeof buf,
                "| Statistic | Value |\n|---|---|\n| n | %zu |\n| Pearson r | %.4f |\n"
                "| Pearson p | %s |\n| Bias (%s) | %.4f |\n| SD of differences (%s) | %.4f |\n"
                "| 95%% limits of agreement (%s) | [%.4f, %.4f] |\n",
                r.n, r.r, pval(r.p).c_str(), units.c_str(), ba.bias, units.c_str(), ba.sd,
                units.c_str(), ba.loa_low, ba.loa_high);
  return buf;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
}

}  // namespace carotid

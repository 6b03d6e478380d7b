#include "carotid/plot.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>

#include <fmt/format.h>

#include "carotid/errors.hpp"

namespace carotid::plot {

namespace {

constexpr const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e",
                                    "#8c564b"};

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

struct Range {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();
  void add(double v) {
    if (!std::isfinite(v)) return;
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  void finish() {
    if (!std::isfinite(lo)) lo = 0, hi = 1;
    if (hi - lo < 1e-12) lo -= 0.5, hi += 0.5;
    const double pad = 0.05 * (hi - lo);
    lo -= pad;
    hi += pad;
  }
};

// 1-2-5 tick step giving roughly five ticks.
double tick_step(double span) {
  const double raw = span / 5;
  const double mag = std::pow(10.0, std::floor(std::log10(raw)));
  for (double m : {1.0, 2.0, 5.0})
    if (m * mag >= raw) return m * mag;
  return 10 * mag;
}

}  // namespace

std::string to_svg(const Figure& fig) {
  const double left = 70, right = 20, top = 40, bottom = 55;
  const double pw = fig.width - left - right, ph = fig.height - top - bottom;
  Range xr, yr;
  for (const auto& s : fig.series) {
    for (std::size_t i = 0; i < std::min(s.x.size(), s.y.size()); ++i) {
      if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) continue;
      xr.add(s.x[i]);
      yr.add(s.y[i]);
    }
  }
  for (double h : fig.hlines) yr.add(h);
  xr.finish();
  yr.finish();
  auto px = [&](double x) { return left + (x - xr.lo) / (xr.hi - xr.lo) * pw; };
  auto py = [&](double y) { return top + (yr.hi - y) / (yr.hi - yr.lo) * ph; };

  std::ostringstream o;
  o << fmt::format(
      "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{}\" height=\"{}\" "
      "font-family=\"sans-serif\" font-size=\"12\">\n",
      fig.width, fig.height);
  o << fmt::format("<rect width=\"{}\" height=\"{}\" fill=\"white\"/>\n", fig.width, fig.height);
  o << fmt::format("<text x=\"{}\" y=\"22\" text-anchor=\"middle\" font-size=\"14\">{}</text>\n",
                   fig.width / 2, escape(fig.title));
  o << fmt::format(
      "<rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"none\" stroke=\"black\"/>\n",
      left, top, pw, ph);

  const double xs = tick_step(xr.hi - xr.lo), ys = tick_step(yr.hi - yr.lo);
  for (double t = std::ceil(xr.lo / xs) * xs; t <= xr.hi; t += xs) {
    o << fmt::format("<line x1=\"{0:.2f}\" y1=\"{1}\" x2=\"{0:.2f}\" y2=\"{2}\" stroke=\"black\"/>"
                     "<text x=\"{0:.2f}\" y=\"{3}\" text-anchor=\"middle\">{4:.4g}</text>\n",
                     px(t), top + ph, top + ph + 5, top + ph + 18, std::abs(t) < xs * 1e-9 ? 0 : t);
  }
  for (double t = std::ceil(yr.lo / ys) * ys; t <= yr.hi; t += ys) {
    o << fmt::format("<line x1=\"{0}\" y1=\"{1:.2f}\" x2=\"{2}\" y2=\"{1:.2f}\" stroke=\"black\"/>"
                     "<text x=\"{3}\" y=\"{4:.2f}\" text-anchor=\"end\">{5:.4g}</text>\n",
                     left - 5, py(t), left, left - 8, py(t) + 4, std::abs(t) < ys * 1e-9 ? 0 : t);
  }
  o << fmt::format("<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">{}</text>\n", left + pw / 2,
                   fig.height - 12, escape(fig.x_label));
  o << fmt::format(
      "<text x=\"16\" y=\"{0}\" text-anchor=\"middle\" transform=\"rotate(-90 16 {0})\">{1}</text>\n",
      top + ph / 2, escape(fig.y_label));

  for (double h : fig.hlines) {
    o << fmt::format("<line x1=\"{}\" y1=\"{:.2f}\" x2=\"{}\" y2=\"{:.2f}\" stroke=\"gray\" "
                     "stroke-dasharray=\"6,4\"/>\n",
                     left, py(h), left + pw, py(h));
  }

  for (std::size_t k = 0; k < fig.series.size(); ++k) {
    const auto& s = fig.series[k];
    const char* color = kPalette[k % std::size(kPalette)];
    std::ostringstream pts;
    for (std::size_t i = 0; i < std::min(s.x.size(), s.y.size()); ++i) {
      if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) continue;
      if (s.markers) {
        o << fmt::format("<circle cx=\"{:.2f}\" cy=\"{:.2f}\" r=\"3\" fill=\"{}\"/>\n", px(s.x[i]),
                         py(s.y[i]), color);
      } else {
        pts << fmt::format("{:.2f},{:.2f} ", px(s.x[i]), py(s.y[i]));
      }
    }
    if (!s.markers) {
      o << fmt::format("<polyline points=\"{}\" fill=\"none\" stroke=\"{}\" stroke-width=\"1.5\"/>\n",
                       pts.str(), color);
    }
    o << fmt::format("<text x=\"{}\" y=\"{}\" fill=\"{}\">{}</text>\n", left + 8,
                     top + 16 + 15 * static_cast<double>(k), color, escape(s.label));
  }
  o << "</svg>\n";
  return o.str();
}

void save_svg(const std::filesystem::path& path, const Figure& fig) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << to_svg(fig);
}

Figure correlation_figure(const std::vector<double>& x, const std::vector<double>& y,
                          const std::string& x_label, const std::string& y_label) {
  const auto r = stats::pearson(x, y);
  const double mx = stats::mean(x), my = stats::mean(y);
  double sxy = 0, sxx = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
  }
  const double slope = sxx > 0 ? sxy / sxx : 0, icpt = my - slope * mx;
  const auto [lo, hi] = std::minmax_element(x.begin(), x.end());
  Figure f;
  f.title = fmt::format("r = {:.3f} (p = {:.3g}, n = {})", r.r, r.p, r.n);
  f.x_label = x_label;
  f.y_label = y_label;
  f.series.push_back({"samples", x, y, true});
  f.series.push_back({fmt::format("y = {:.3f} x + {:.3g}", slope, icpt),
                      {*lo, *hi},
                      {slope * *lo + icpt, slope * *hi + icpt},
                      false});
  return f;
}

Figure bland_altman_figure(const std::vector<double>& a, const std::vector<double>& b,
                           const std::string& units) {
  const auto ba = stats::bland_altman(a, b);
  std::vector<double> means, diffs;
  for (std::size_t i = 0; i < a.size(); ++i) {
    means.push_back((a[i] + b[i]) / 2);
    diffs.push_back(a[i] - b[i]);
  }
  Figure f;
  f.title = fmt::format("bias {:.4g}, limits [{:.4g}, {:.4g}] {}", ba.bias, ba.loa_low,
                        ba.loa_high, units);
  f.x_label = "mean (" + units + ")";
  f.y_label = "difference (" + units + ")";
  f.series.push_back({"pairs", means, diffs, true});
  f.hlines = {ba.bias, ba.loa_low, ba.loa_high};
  return f;
}

Figure loss_curve_figure(const std::filesystem::path& train_log_csv) {
  std::ifstream in(train_log_csv);
  if (!in) throw IoError("cannot read " + train_log_csv.string());
  std::string line;
  if (!std::getline(in, line)) throw FormatError(train_log_csv.string() + ": empty log");
  std::vector<std::string> header;
  {
    std::stringstream ss(line);
    for (std::string cell; std::getline(ss, cell, ',');) header.push_back(cell);
  }
  std::map<std::string, std::vector<double>> cols;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::size_t c = 0;
    for (std::string cell; std::getline(ss, cell, ','); ++c) {
      if (c >= header.size()) throw FormatError(train_log_csv.string() + ": ragged row");
      try {
        cols[header[c]].push_back(std::stod(cell));
      } catch (const std::exception&) {
        throw FormatError(train_log_csv.string() + ": non-numeric cell '" + cell + "'");
      }
    }
  }
  if (!cols.count("epoch")) throw FormatError(train_log_csv.string() + ": no epoch column");
  Figure f;
  f.title = "training curves";
  f.x_label = "epoch";
  f.y_label = "loss / DSC";
  for (const char* name : {"L_MAB", "L_LIB", "L_CVW", "val_loss", "val_dsc"}) {
    if (cols.count(name)) f.series.push_back({name, cols["epoch"], cols[name], false});
  }
  return f;
}

}  // namespace carotid::plot

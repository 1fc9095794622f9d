#include "fedsandbox/svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>

#include "fedsandbox/error.hpp"

namespace fedsandbox {

namespace {

constexpr double kWidth = 760, kHeight = 440;
constexpr double kLeft = 78, kRight = 180, kTop = 48, kBottom = 60;

const char* kPalette[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728",
                          "#9467bd", "#8c564b", "#e377c2", "#7f7f7f"};
constexpr int kPaletteSize = 8;

std::string num(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  return buf;
}

std::string tick_label(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.4g", v);
  return buf;
}

struct Range {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();
  void grow(double v) {
    if (!std::isfinite(v)) return;
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  bool valid() const { return lo <= hi; }
};

}  // namespace

BandPlot::BandPlot(std::string title, std::string x_label, std::string y_label)
    : title_(std::move(title)),
      x_label_(std::move(x_label)),
      y_label_(std::move(y_label)) {}

void BandPlot::add_band(const std::vector<double>& x,
                        const std::vector<double>& lo,
                        const std::vector<double>& hi,
                        const std::string& label) {
  bands_.push_back({x, lo, hi, label, next_color_++});
}

void BandPlot::add_line(const std::vector<double>& x,
                        const std::vector<double>& y,
                        const std::string& label) {
  lines_.push_back({x, y, label, next_color_++});
}

void BandPlot::add_hline(double y, const std::string& label, bool dash_dot) {
  hlines_.push_back({y, label, dash_dot});
}

void BandPlot::write(const std::string& path) const {
  Range xr, yr;
  for (const auto& b : bands_) {
    for (double v : b.x) xr.grow(std::log10(v));
    for (double v : b.lo) yr.grow(v);
    for (double v : b.hi) yr.grow(v);
  }
  for (const auto& l : lines_) {
    for (double v : l.x) xr.grow(std::log10(v));
    for (double v : l.y) yr.grow(v);
  }
  for (const auto& h : hlines_) yr.grow(h.y);
  if (!xr.valid() || !yr.valid())
    throw Error("band plot: nothing to draw for " + path);
  if (yr.hi == yr.lo) {
    yr.lo -= 1;
    yr.hi += 1;
  }
  const double pad = 0.06 * (yr.hi - yr.lo);
  yr.lo -= pad;
  yr.hi += pad;

  const double plot_w = kWidth - kLeft - kRight;
  const double plot_h = kHeight - kTop - kBottom;
  const auto px = [&](double logx) {
    return kLeft + (logx - xr.lo) / (xr.hi - xr.lo) * plot_w;
  };
  const auto py = [&](double y) {
    return kTop + (yr.hi - y) / (yr.hi - yr.lo) * plot_h;
  };

  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write figure " + path);
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth
      << "\" height=\"" << kHeight << "\" viewBox=\"0 0 " << kWidth << " "
      << kHeight << "\">\n";
  out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  out << "<text x=\"" << (kLeft + plot_w / 2) << "\" y=\"24\" font-size=\"15\" "
      << "text-anchor=\"middle\" font-family=\"sans-serif\">" << title_
      << "</text>\n";

  // x ticks at decades
  for (int d = int(std::ceil(xr.lo - 1e-9)); d <= int(std::floor(xr.hi + 1e-9));
       ++d) {
    const double x = px(d);
    out << "<line x1=\"" << num(x) << "\" y1=\"" << num(kTop) << "\" x2=\""
        << num(x) << "\" y2=\"" << num(kTop + plot_h)
        << "\" stroke=\"#dddddd\" stroke-width=\"1\"/>\n";
    out << "<text x=\"" << num(x) << "\" y=\"" << num(kTop + plot_h + 20)
        << "\" font-size=\"12\" text-anchor=\"middle\" "
           "font-family=\"sans-serif\">"
        << tick_label(std::pow(10.0, d)) << "</text>\n";
  }
  // y ticks: ~6 nice steps
  const double raw_step = (yr.hi - yr.lo) / 6.0;
  const double mag = std::pow(10.0, std::floor(std::log10(raw_step)));
  double step = mag;
  for (const double m : {1.0, 2.0, 5.0, 10.0}) {
    if (mag * m >= raw_step) {
      step = mag * m;
      break;
    }
  }
  for (double y = std::ceil(yr.lo / step) * step; y <= yr.hi + 1e-12 * step;
       y += step) {
    const double yy = py(y);
    out << "<line x1=\"" << num(kLeft) << "\" y1=\"" << num(yy) << "\" x2=\""
        << num(kLeft + plot_w) << "\" y2=\"" << num(yy)
        << "\" stroke=\"#dddddd\" stroke-width=\"1\"/>\n";
    out << "<text x=\"" << num(kLeft - 8) << "\" y=\"" << num(yy + 4)
        << "\" font-size=\"12\" text-anchor=\"end\" "
           "font-family=\"sans-serif\">"
        << tick_label(y) << "</text>\n";
  }

  // bands then lines so lines stay visible
  for (const auto& b : bands_) {
    const char* color = kPalette[b.color % kPaletteSize];
    out << "<polygon fill=\"" << color << "\" fill-opacity=\"0.25\" "
        << "stroke=\"" << color << "\" stroke-width=\"1\" points=\"";
    for (std::size_t i = 0; i < b.x.size(); ++i)
      out << num(px(std::log10(b.x[i]))) << ',' << num(py(b.hi[i])) << ' ';
    for (std::size_t i = b.x.size(); i-- > 0;)
      out << num(px(std::log10(b.x[i]))) << ',' << num(py(b.lo[i])) << ' ';
    out << "\"/>\n";
  }
  for (const auto& l : lines_) {
    const char* color = kPalette[l.color % kPaletteSize];
    out << "<polyline fill=\"none\" stroke=\"" << color
        << "\" stroke-width=\"1.8\" points=\"";
    for (std::size_t i = 0; i < l.x.size(); ++i)
      out << num(px(std::log10(l.x[i]))) << ',' << num(py(l.y[i])) << ' ';
    out << "\"/>\n";
  }
  for (const auto& h : hlines_) {
    const double yy = py(h.y);
    out << "<line x1=\"" << num(kLeft) << "\" y1=\"" << num(yy) << "\" x2=\""
        << num(kLeft + plot_w) << "\" y2=\"" << num(yy) << "\" stroke=\""
        << (h.dash_dot ? "#d62728" : "#333333") << "\" stroke-width=\"1.6\""
        << (h.dash_dot ? " stroke-dasharray=\"9 4 2 4\"" :
                         " stroke-dasharray=\"6 4\"")
        << "/>\n";
  }

  // axes box + labels
  out << "<rect x=\"" << num(kLeft) << "\" y=\"" << num(kTop) << "\" width=\""
      << num(plot_w) << "\" height=\"" << num(plot_h)
      << "\" fill=\"none\" stroke=\"#333333\" stroke-width=\"1.2\"/>\n";
  out << "<text x=\"" << num(kLeft + plot_w / 2) << "\" y=\""
      << num(kHeight - 14)
      << "\" font-size=\"13\" text-anchor=\"middle\" "
         "font-family=\"sans-serif\">"
      << x_label_ << "</text>\n";
  out << "<text x=\"20\" y=\"" << num(kTop + plot_h / 2)
      << "\" font-size=\"13\" text-anchor=\"middle\" "
         "font-family=\"sans-serif\" transform=\"rotate(-90 20 "
      << num(kTop + plot_h / 2) << ")\">" << y_label_ << "</text>\n";

  // legend
  double ly = kTop + 6;
  const double lx = kLeft + plot_w + 14;
  const auto legend_entry = [&](const std::string& label,
                                const std::string& color,
                                const std::string& dash) {
    out << "<line x1=\"" << num(lx) << "\" y1=\"" << num(ly + 5) << "\" x2=\""
        << num(lx + 26) << "\" y2=\"" << num(ly + 5) << "\" stroke=\"" << color
        << "\" stroke-width=\"3\"" << dash << "/>\n";
    out << "<text x=\"" << num(lx + 32) << "\" y=\"" << num(ly + 9)
        << "\" font-size=\"12\" font-family=\"sans-serif\">" << label
        << "</text>\n";
    ly += 19;
  };
  for (const auto& b : bands_)
    legend_entry(b.label, kPalette[b.color % kPaletteSize], "");
  for (const auto& l : lines_)
    legend_entry(l.label, kPalette[l.color % kPaletteSize], "");
  for (const auto& h : hlines_)
    legend_entry(h.label, h.dash_dot ? "#d62728" : "#333333",
                 h.dash_dot ? " stroke-dasharray=\"9 4 2 4\""
                            : " stroke-dasharray=\"6 4\"");
  out << "</svg>\n";
}

}  // namespace fedsandbox

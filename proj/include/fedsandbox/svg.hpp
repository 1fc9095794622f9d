#pragma once

#include <string>
#include <vector>

namespace fedsandbox {

// Minimal SVG band-plot writer for the privacy-utility figures: log-x axis,
// shaded quantile bands, reference lines, legend. No external dependencies.
class BandPlot {
 public:
  BandPlot(std::string title, std::string x_label, std::string y_label);

  void add_band(const std::vector<double>& x, const std::vector<double>& lo,
                const std::vector<double>& hi, const std::string& label);
  void add_line(const std::vector<double>& x, const std::vector<double>& y,
                const std::string& label);
  // Horizontal reference line; dash_dot draws the critical-value style.
  void add_hline(double y, const std::string& label, bool dash_dot);

  void write(const std::string& path) const;

 private:
  struct Band {
    std::vector<double> x, lo, hi;
    std::string label;
    int color;
  };
  struct Line {
    std::vector<double> x, y;
    std::string label;
    int color;
  };
  struct HLine {
    double y;
    std::string label;
    bool dash_dot;
  };

  std::string title_, x_label_, y_label_;
  std::vector<Band> bands_;
  std::vector<Line> lines_;
  std::vector<HLine> hlines_;
  int next_color_ = 0;
};

}  // namespace fedsandbox

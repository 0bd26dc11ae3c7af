#ifndef DEBENCH_PLOT_HPP_
#define DEBENCH_PLOT_HPP_

#include <string>
#include <vector>

#include "debench/image.hpp"

namespace debench::plot {

// One bar: a mean with a min-max whisker, all in y-axis units.
struct Bar {
  float mean = 0.f;
  float lo = 0.f;
  float hi = 0.f;
};

// Bars sharing an x-axis slot (e.g. one task evaluated under several
// conditions). `bars[i]` is colored and legended as series i.
struct BarGroup {
  std::string label;
  std::vector<Bar> bars;
};

struct BarChart {
  std::string title;
  std::string ylabel;
  std::vector<std::string> series;  // legend entries; size = bars per group
  std::vector<BarGroup> groups;
  float ymin = 0.f;
  float ymax = 1.f;
  float ytick = 0.2f;
};

// 5x7 bitmap text. (row, col) is the top-left corner; scale integer-zooms the
// glyphs. Characters outside the font render as blanks.
void draw_text(Image& img, int row, int col, const std::string& text,
               const Eigen::Vector3f& color, int scale = 1);
int text_width(const std::string& text, int scale = 1);
constexpr int kGlyphH = 7;
constexpr int kGlyphW = 5;

// Renders the chart to an RGB image. Throws Error on an empty or inconsistent
// chart (groups with differing bar counts, ymax <= ymin).
Image render(const BarChart& chart, int width = 900, int height = 480);

// Distinct fill colors assigned to series 0, 1, ... (cycles past the end).
Eigen::Vector3f series_color(int index);

}  // namespace debench::plot

#endif  // DEBENCH_PLOT_HPP_

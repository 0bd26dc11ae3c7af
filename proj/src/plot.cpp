#include "debench/plot.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <map>

#include "debench/common.hpp"

namespace debench::plot {
namespace {

// ---------------------------------------------------------------------------
// 5x7 font, spelled out so glyph bugs are visible in the source.

using Glyph = std::array<const char*, 7>;

const std::map<char, Glyph>& font() {
  static const std::map<char, Glyph> f = {
      {' ', {"     ", "     ", "     ", "     ", "     ", "     ", "     "}},
      {'A', {" ### ", "#   #", "#   #", "#####", "#   #", "#   #", "#   #"}},
      {'B', {"#### ", "#   #", "#   #", "#### ", "#   #", "#   #", "#### "}},
      {'C', {" ### ", "#   #", "#    ", "#    ", "#    ", "#   #", " ### "}},
      {'D', {"#### ", "#   #", "#   #", "#   #", "#   #", "#   #", "#### "}},
      {'E', {"#####", "#    ", "#    ", "#### ", "#    ", "#    ", "#####"}},
      {'F', {"#####", "#    ", "#    ", "#### ", "#    ", "#    ", "#    "}},
      {'G', {" ### ", "#   #", "#    ", "# ###", "#   #", "#   #", " ### "}},
      {'H', {"#   #", "#   #", "#   #", "#####", "#   #", "#   #", "#   #"}},
      {'I', {" ### ", "  #  ", "  #  ", "  #  ", "  #  ", "  #  ", " ### "}},
      {'J', {"  ###", "   # ", "   # ", "   # ", "   # ", "#  # ", " ##  "}},
      {'K', {"#   #", "#  # ", "# #  ", "##   ", "# #  ", "#  # ", "#   #"}},
      {'L', {"#    ", "#    ", "#    ", "#    ", "#    ", "#    ", "#####"}},
      {'M', {"#   #", "## ##", "# # #", "# # #", "#   #", "#   #", "#   #"}},
      {'N', {"#   #", "##  #", "# # #", "#  ##", "#   #", "#   #", "#   #"}},
      {'O', {" ### ", "#   #", "#   #", "#   #", "#   #", "#   #", " ### "}},
      {'P', {"#### ", "#   #", "#   #", "#### ", "#    ", "#    ", "#    "}},
      {'Q', {" ### ", "#   #", "#   #", "#   #", "# # #", "#  # ", " ## #"}},
      {'R', {"#### ", "#   #", "#   #", "#### ", "# #  ", "#  # ", "#   #"}},
      {'S', {" ####", "#    ", "#    ", " ### ", "    #", "    #", "#### "}},
      {'T', {"#####", "  #  ", "  #  ", "  #  ", "  #  ", "  #  ", "  #  "}},
      {'U', {"#   #", "#   #", "#   #", "#   #", "#   #", "#   #", " ### "}},
      {'V', {"#   #", "#   #", "#   #", "#   #", "#   #", " # # ", "  #  "}},
      {'W', {"#   #", "#   #", "#   #", "# # #", "# # #", "## ##", "#   #"}},
      {'X', {"#   #", "#   #", " # # ", "  #  ", " # # ", "#   #", "#   #"}},
      {'Y', {"#   #", "#   #", " # # ", "  #  ", "  #  ", "  #  ", "  #  "}},
      {'Z', {"#####", "    #", "   # ", "  #  ", " #   ", "#    ", "#####"}},
      {'0', {" ### ", "#   #", "#  ##", "# # #", "##  #", "#   #", " ### "}},
      {'1', {"  #  ", " ##  ", "  #  ", "  #  ", "  #  ", "  #  ", " ### "}},
      {'2', {" ### ", "#   #", "    #", "   # ", "  #  ", " #   ", "#####"}},
      {'3', {"#####", "   # ", "  #  ", "   # ", "    #", "#   #", " ### "}},
      {'4', {"   # ", "  ## ", " # # ", "#  # ", "#####", "   # ", "   # "}},
      {'5', {"#####", "#    ", "#### ", "    #", "    #", "#   #", " ### "}},
      {'6', {"  ## ", " #   ", "#    ", "#### ", "#   #", "#   #", " ### "}},
      {'7', {"#####", "    #", "   # ", "  #  ", " #   ", " #   ", " #   "}},
      {'8', {" ### ", "#   #", "#   #", " ### ", "#   #", "#   #", " ### "}},
      {'9', {" ### ", "#   #", "#   #", " ####", "    #", "   # ", " ##  "}},
      {'a', {"     ", "     ", " ### ", "    #", " ####", "#   #", " ####"}},
      {'b', {"#    ", "#    ", "#### ", "#   #", "#   #", "#   #", "#### "}},
      {'c', {"     ", "     ", " ### ", "#    ", "#    ", "#   #", " ### "}},
      {'d', {"    #", "    #", " ####", "#   #", "#   #", "#   #", " ####"}},
      {'e', {"     ", "     ", " ### ", "#   #", "#####", "#    ", " ### "}},
      {'f', {"  ## ", " #  #", " #   ", "###  ", " #   ", " #   ", " #   "}},
      {'g', {"     ", " ####", "#   #", "#   #", " ####", "    #", " ### "}},
      {'h', {"#    ", "#    ", "#### ", "#   #", "#   #", "#   #", "#   #"}},
      {'i', {"  #  ", "     ", " ##  ", "  #  ", "  #  ", "  #  ", " ### "}},
      {'j', {"   # ", "     ", "  ## ", "   # ", "   # ", "#  # ", " ##  "}},
      {'k', {"#    ", "#    ", "#  # ", "# #  ", "##   ", "# #  ", "#  # "}},
      {'l', {" ##  ", "  #  ", "  #  ", "  #  ", "  #  ", "  #  ", " ### "}},
      {'m', {"     ", "     ", "## # ", "# # #", "# # #", "# # #", "# # #"}},
      {'n', {"     ", "     ", "#### ", "#   #", "#   #", "#   #", "#   #"}},
      {'o', {"     ", "     ", " ### ", "#   #", "#   #", "#   #", " ### "}},
      {'p', {"     ", "#### ", "#   #", "#   #", "#### ", "#    ", "#    "}},
      {'q', {"     ", " ####", "#   #", "#   #", " ####", "    #", "    #"}},
      {'r', {"     ", "     ", "# ## ", "##  #", "#    ", "#    ", "#    "}},
      {'s', {"     ", "     ", " ####", "#    ", " ### ", "    #", "#### "}},
      {'t', {" #   ", " #   ", "###  ", " #   ", " #   ", " #  #", "  ## "}},
      {'u', {"     ", "     ", "#   #", "#   #", "#   #", "#  ##", " ## #"}},
      {'v', {"     ", "     ", "#   #", "#   #", "#   #", " # # ", "  #  "}},
      {'w', {"     ", "     ", "#   #", "#   #", "# # #", "# # #", " # # "}},
      {'x', {"     ", "     ", "#   #", " # # ", "  #  ", " # # ", "#   #"}},
      {'y', {"     ", "#   #", "#   #", " ####", "    #", "   # ", " ##  "}},
      {'z', {"     ", "     ", "#####", "   # ", "  #  ", " #   ", "#####"}},
      {'.', {"     ", "     ", "     ", "     ", "     ", " ##  ", " ##  "}},
      {',', {"     ", "     ", "     ", "     ", "  ## ", "  #  ", " #   "}},
      {'-', {"     ", "     ", "     ", "#####", "     ", "     ", "     "}},
      {'_', {"     ", "     ", "     ", "     ", "     ", "     ", "#####"}},
      {'%', {"##   ", "##  #", "   # ", "  #  ", " #   ", "#  ##", "   ##"}},
      {'(', {"   # ", "  #  ", " #   ", " #   ", " #   ", "  #  ", "   # "}},
      {')', {" #   ", "  #  ", "   # ", "   # ", "   # ", "  #  ", " #   "}},
      {'/', {"    #", "    #", "   # ", "  #  ", " #   ", "#    ", "#    "}},
      {':', {"     ", " ##  ", " ##  ", "     ", " ##  ", " ##  ", "     "}},
      {'=', {"     ", "     ", "#####", "     ", "#####", "     ", "     "}},
      {'+', {"     ", "  #  ", "  #  ", "#####", "  #  ", "  #  ", "     "}},
      {'<', {"   # ", "  #  ", " #   ", "#    ", " #   ", "  #  ", "   # "}},
      {'>', {" #   ", "  #  ", "   # ", "    #", "   # ", "  #  ", " #   "}},
      {'?', {" ### ", "#   #", "    #", "   # ", "  #  ", "     ", "  #  "}},
      {'\'', {"  #  ", "  #  ", "     ", "     ", "     ", "     ", "     "}},
  };
  return f;
}

void fill_rect(Image& img, int r0, int c0, int r1, int c1, const Eigen::Vector3f& color) {
  r0 = std::max(r0, 0);
  c0 = std::max(c0, 0);
  r1 = std::min(r1, img.rows());
  c1 = std::min(c1, img.cols());
  for (int r = r0; r < r1; ++r)
    for (int c = c0; c < c1; ++c) img.set_pixel(r, c, color);
}

void hline(Image& img, int r, int c0, int c1, const Eigen::Vector3f& color) {
  fill_rect(img, r, c0, r + 1, c1, color);
}

void vline(Image& img, int c, int r0, int r1, const Eigen::Vector3f& color) {
  fill_rect(img, r0, c, r1, c + 1, color);
}

std::string format_tick(float v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  std::string s(buf);
  while (s.size() > 1 && s.back() == '0') s.pop_back();
  if (!s.empty() && s.back() == '.') s.pop_back();
  return s;
}

}  // namespace

int text_width(const std::string& text, int scale) {
  if (text.empty()) return 0;
  return static_cast<int>(text.size()) * (kGlyphW + 1) * scale - scale;
}

void draw_text(Image& img, int row, int col, const std::string& text,
               const Eigen::Vector3f& color, int scale) {
  const auto& f = font();
  int x = col;
  for (char ch : text) {
    auto it = f.find(ch);
    if (it != f.end()) {
      for (int gr = 0; gr < kGlyphH; ++gr)
        for (int gc = 0; gc < kGlyphW; ++gc)
          if (it->second[gr][gc] == '#')
            fill_rect(img, row + gr * scale, x + gc * scale, row + (gr + 1) * scale,
                      x + (gc + 1) * scale, color);
    }
    x += (kGlyphW + 1) * scale;
  }
}

Eigen::Vector3f series_color(int index) {
  static const std::array<Eigen::Vector3f, 6> palette = {
      Eigen::Vector3f(0.12f, 0.47f, 0.71f), Eigen::Vector3f(1.00f, 0.50f, 0.05f),
      Eigen::Vector3f(0.17f, 0.63f, 0.17f), Eigen::Vector3f(0.84f, 0.15f, 0.16f),
      Eigen::Vector3f(0.58f, 0.40f, 0.74f), Eigen::Vector3f(0.09f, 0.75f, 0.81f)};
  return palette[static_cast<std::size_t>(index) % palette.size()];
}

Image render(const BarChart& chart, int width, int height) {
  if (chart.groups.empty()) throw Error("plot: chart has no groups");
  if (chart.ymax <= chart.ymin || chart.ytick <= 0.f) throw Error("plot: bad y range");
  const std::size_t nseries = chart.series.empty() && !chart.groups.empty()
                                  ? chart.groups[0].bars.size()
                                  : chart.series.size();
  for (const auto& g : chart.groups)
    if (g.bars.size() != nseries) throw Error("plot: group '" + g.label + "' bar count mismatch");
  if (nseries == 0) throw Error("plot: chart has no series");
  if (width < 200 || height < 120) throw Error("plot: canvas too small");

  Image img(height, width);
  img.fill({1.f, 1.f, 1.f});

  const Eigen::Vector3f ink(0.15f, 0.15f, 0.15f);
  const Eigen::Vector3f grid(0.85f, 0.85f, 0.85f);
  const Eigen::Vector3f whisker(0.25f, 0.25f, 0.25f);

  const int top = 40;
  const int left = 56;
  const int right = width - 14;
  const int bottom = height - 26;

  draw_text(img, 8, left, chart.title, ink, 2);
  if (!chart.ylabel.empty()) draw_text(img, top - kGlyphH - 4, 6, chart.ylabel, ink, 1);

  const auto y_of = [&](float v) {
    const float t = (v - chart.ymin) / (chart.ymax - chart.ymin);
    return bottom - static_cast<int>(std::lround(t * (bottom - top)));
  };

  // gridlines + tick labels
  for (float v = chart.ymin; v <= chart.ymax + 1e-6f; v += chart.ytick) {
    const int y = y_of(v);
    hline(img, y, left, right, v == chart.ymin ? ink : grid);
    const std::string lab = format_tick(v);
    draw_text(img, y - kGlyphH / 2, left - 6 - text_width(lab), lab, ink, 1);
  }
  vline(img, left, top, bottom + 1, ink);

  // bars
  const int ngroups = static_cast<int>(chart.groups.size());
  const float slot = static_cast<float>(right - left) / ngroups;
  const float band = 0.8f * slot;
  const float bw = band / static_cast<float>(nseries);
  for (int gi = 0; gi < ngroups; ++gi) {
    const auto& g = chart.groups[gi];
    const float gx0 = left + slot * gi + 0.5f * (slot - band);
    for (std::size_t si = 0; si < nseries; ++si) {
      const Bar& b = g.bars[si];
      const int x0 = static_cast<int>(std::lround(gx0 + bw * si));
      const int x1 = static_cast<int>(std::lround(gx0 + bw * (si + 1))) - 1;
      const float mean = std::clamp(b.mean, chart.ymin, chart.ymax);
      fill_rect(img, y_of(mean), x0, bottom, x1, series_color(static_cast<int>(si)));
      const float lo = std::clamp(std::min(b.lo, b.hi), chart.ymin, chart.ymax);
      const float hi = std::clamp(std::max(b.lo, b.hi), chart.ymin, chart.ymax);
      if (hi > lo) {
        const int cx = (x0 + x1) / 2;
        vline(img, cx, y_of(hi), y_of(lo) + 1, whisker);
        hline(img, y_of(hi), cx - 2, cx + 3, whisker);
        hline(img, y_of(lo), cx - 2, cx + 3, whisker);
      }
    }
    const int lx = static_cast<int>(std::lround(left + slot * gi + 0.5f * slot)) -
                   text_width(g.label) / 2;
    draw_text(img, bottom + 6, lx, g.label, ink, 1);
  }

  // legend, right-aligned in the title band
  if (!chart.series.empty()) {
    int lw = 0;
    for (const auto& s : chart.series) lw += 12 + text_width(s) + 10;
    int x = std::max(left, right - lw);
    for (std::size_t si = 0; si < chart.series.size(); ++si) {
      fill_rect(img, 10, x, 18, x + 8, series_color(static_cast<int>(si)));
      draw_text(img, 10, x + 12, chart.series[si], ink, 1);
      x += 12 + text_width(chart.series[si]) + 10;
    }
  }
  return img;
}

}  // namespace debench::plot

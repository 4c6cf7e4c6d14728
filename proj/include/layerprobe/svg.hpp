#pragma once

// Minimal self-contained SVG charts (fixed 900x540, no external assets, no
// timestamps) for the report figures.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace layerprobe::svg {

inline constexpr int kWidth = 900;
inline constexpr int kHeight = 540;

struct Series {
  std::string name;
  std::vector<double> x;
  std::vector<double> y;
};

inline std::string escape(std::string_view s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

inline std::string num(double v, int precision = 2) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", precision, v);
  return buf;
}

inline const char* color(std::size_t i) {
  static constexpr const char* kPalette[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd",
                                             "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};
  return kPalette[i % 10];
}

struct Range {
  double lo = 0.0;
  double hi = 1.0;
};

inline Range padded_range(double lo, double hi) {
  if (!(lo <= hi)) return {0.0, 1.0};
  if (hi - lo < 1e-12) {
    const double pad = std::max(std::abs(lo) * 0.05, 0.5);
    return {lo - pad, hi + pad};
  }
  const double pad = 0.05 * (hi - lo);
  return {lo - pad, hi + pad};
}

// Plot frame with axes, ticks and labels; maps data to pixel coordinates.
class Frame {
 public:
  static constexpr double kLeft = 80, kRight = 200, kTop = 50, kBottom = 70;

  Frame(std::string title, std::string xlabel, std::string ylabel, Range x, Range y)
      : title_(std::move(title)), xlabel_(std::move(xlabel)), ylabel_(std::move(ylabel)), x_(x), y_(y) {}

  double px(double x) const { return kLeft + (x - x_.lo) / (x_.hi - x_.lo) * (kWidth - kLeft - kRight); }
  double py(double y) const { return kHeight - kBottom - (y - y_.lo) / (y_.hi - y_.lo) * (kHeight - kTop - kBottom); }

  void add(std::string element) { body_ << element << '\n'; }

  void legend(std::size_t index, std::string_view name, bool line = true) {
    const double y = kTop + 10 + 20.0 * static_cast<double>(index);
    const double x = kWidth - kRight + 20;
    if (line) {
      body_ << "<line x1=\"" << num(x) << "\" y1=\"" << num(y) << "\" x2=\"" << num(x + 20) << "\" y2=\"" << num(y)
            << "\" stroke=\"" << color(index) << "\" stroke-width=\"2\"/>\n";
    } else {
      body_ << "<circle cx=\"" << num(x + 10) << "\" cy=\"" << num(y) << "\" r=\"4\" fill=\"" << color(index)
            << "\"/>\n";
    }
    body_ << "<text x=\"" << num(x + 26) << "\" y=\"" << num(y + 4) << "\" font-size=\"11\">" << escape(name)
          << "</text>\n";
  }

  std::string render() const {
    std::ostringstream out;
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\"" << kHeight
        << "\" viewBox=\"0 0 " << kWidth << ' ' << kHeight << "\" font-family=\"sans-serif\">\n";
    out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    out << "<text x=\"" << kWidth / 2 << "\" y=\"28\" text-anchor=\"middle\" font-size=\"16\">" << escape(title_)
        << "</text>\n";
    const double x0 = kLeft, x1 = kWidth - kRight, y0 = kHeight - kBottom, y1 = kTop;
    out << "<rect x=\"" << num(x0) << "\" y=\"" << num(y1) << "\" width=\"" << num(x1 - x0) << "\" height=\""
        << num(y0 - y1) << "\" fill=\"none\" stroke=\"#333\"/>\n";
    for (int i = 0; i <= 5; ++i) {
      const double fx = x_.lo + (x_.hi - x_.lo) * i / 5.0;
      const double fy = y_.lo + (y_.hi - y_.lo) * i / 5.0;
      out << "<text x=\"" << num(px(fx)) << "\" y=\"" << num(y0 + 18) << "\" text-anchor=\"middle\" font-size=\"11\">"
          << num(fx) << "</text>\n";
      out << "<line x1=\"" << num(x0) << "\" y1=\"" << num(py(fy)) << "\" x2=\"" << num(x1) << "\" y2=\""
          << num(py(fy)) << "\" stroke=\"#eee\"/>\n";
      out << "<text x=\"" << num(x0 - 6) << "\" y=\"" << num(py(fy) + 4) << "\" text-anchor=\"end\" font-size=\"11\">"
          << num(fy, 3) << "</text>\n";
    }
    out << "<text x=\"" << num((x0 + x1) / 2) << "\" y=\"" << kHeight - 25
        << "\" text-anchor=\"middle\" font-size=\"13\">" << escape(xlabel_) << "</text>\n";
    out << "<text transform=\"translate(20," << num((y0 + y1) / 2) << ") rotate(-90)\" text-anchor=\"middle\" "
        << "font-size=\"13\">" << escape(ylabel_) << "</text>\n";
    out << body_.str();
    out << "</svg>\n";
    return out.str();
  }

 private:
  std::string title_, xlabel_, ylabel_;
  Range x_, y_;
  std::ostringstream body_;
};

inline std::pair<Range, Range> data_ranges(const std::vector<Series>& series) {
  double xl = std::numeric_limits<double>::infinity(), xh = -xl, yl = xl, yh = -xl;
  for (const auto& s : series) {
    for (double v : s.x) xl = std::min(xl, v), xh = std::max(xh, v);
    for (double v : s.y) yl = std::min(yl, v), yh = std::max(yh, v);
  }
  return {padded_range(xl, xh), padded_range(yl, yh)};
}

inline std::string line_chart(const std::string& title, const std::string& xlabel, const std::string& ylabel,
                              const std::vector<Series>& series) {
  const auto [xr, yr] = data_ranges(series);
  Frame f(title, xlabel, ylabel, xr, yr);
  for (std::size_t i = 0; i < series.size(); ++i) {
    const auto& s = series[i];
    std::string pts;
    for (std::size_t k = 0; k < s.x.size() && k < s.y.size(); ++k) {
      pts += (k ? " " : "") + num(f.px(s.x[k])) + "," + num(f.py(s.y[k]));
    }
    f.add("<polyline fill=\"none\" stroke=\"" + std::string(color(i)) + "\" stroke-width=\"2\" points=\"" + pts +
          "\"/>");
    for (std::size_t k = 0; k < s.x.size() && k < s.y.size(); ++k) {
      f.add("<circle cx=\"" + num(f.px(s.x[k])) + "\" cy=\"" + num(f.py(s.y[k])) + "\" r=\"3\" fill=\"" +
            color(i) + "\"/>");
    }
    f.legend(i, s.name);
  }
  return f.render();
}

inline std::string scatter_chart(const std::string& title, const std::string& xlabel, const std::string& ylabel,
                                 const std::vector<Series>& series) {
  const auto [xr, yr] = data_ranges(series);
  Frame f(title, xlabel, ylabel, xr, yr);
  for (std::size_t i = 0; i < series.size(); ++i) {
    const auto& s = series[i];
    for (std::size_t k = 0; k < s.x.size() && k < s.y.size(); ++k) {
      f.add("<circle cx=\"" + num(f.px(s.x[k])) + "\" cy=\"" + num(f.py(s.y[k])) + "\" r=\"4\" fill=\"" +
            color(i) + "\" fill-opacity=\"0.8\"/>");
    }
    f.legend(i, s.name, false);
  }
  return f.render();
}

// One bar per label; positive bars in the first palette color, negative in the second.
inline std::string bar_chart(const std::string& title, const std::string& ylabel,
                             const std::vector<std::string>& labels, const std::vector<double>& values) {
  double lo = 0.0, hi = 0.0;
  for (double v : values) lo = std::min(lo, v), hi = std::max(hi, v);
  const Range yr = padded_range(lo, hi);
  const double n = std::max<double>(1.0, static_cast<double>(values.size()));
  Frame f(title, "", ylabel, Range{0.0, n}, yr);
  for (std::size_t i = 0; i < values.size(); ++i) {
    const double x0 = f.px(static_cast<double>(i) + 0.15);
    const double x1 = f.px(static_cast<double>(i) + 0.85);
    const double y0 = f.py(0.0);
    const double y1 = f.py(values[i]);
    f.add("<rect x=\"" + num(x0) + "\" y=\"" + num(std::min(y0, y1)) + "\" width=\"" + num(x1 - x0) +
          "\" height=\"" + num(std::abs(y1 - y0)) + "\" fill=\"" + color(values[i] >= 0.0 ? 0 : 1) + "\"/>");
    f.add("<text transform=\"translate(" + num((x0 + x1) / 2) + "," + num(f.py(yr.lo) + 30) +
          ") rotate(-30)\" text-anchor=\"end\" font-size=\"9\">" + escape(labels[i]) + "</text>");
  }
  f.add("<line x1=\"" + num(f.px(0.0)) + "\" y1=\"" + num(f.py(0.0)) + "\" x2=\"" + num(f.px(n)) + "\" y2=\"" +
        num(f.py(0.0)) + "\" stroke=\"#333\"/>");
  return f.render();
}

// Histogram over [lo, hi] with `bins` equal-width bins.
inline std::string histogram(const std::string& title, const std::string& xlabel, const std::vector<double>& values,
                             double lo, double hi, std::size_t bins) {
  std::vector<double> counts(bins, 0.0);
  for (double v : values) {
    auto b = static_cast<std::size_t>(std::clamp((v - lo) / (hi - lo), 0.0, 1.0) * static_cast<double>(bins));
    counts[std::min(b, bins - 1)] += 1.0;
  }
  const double top = std::max(1.0, *std::max_element(counts.begin(), counts.end()));
  Frame f(title, xlabel, "count", Range{lo, hi}, Range{0.0, top * 1.1});
  const double width = (hi - lo) / static_cast<double>(bins);
  for (std::size_t b = 0; b < bins; ++b) {
    const double x0 = f.px(lo + width * static_cast<double>(b));
    const double x1 = f.px(lo + width * static_cast<double>(b + 1));
    f.add("<rect x=\"" + num(x0) + "\" y=\"" + num(f.py(counts[b])) + "\" width=\"" + num(x1 - x0 - 1) +
          "\" height=\"" + num(f.py(0.0) - f.py(counts[b])) + "\" fill=\"" + color(0) + "\"/>");
  }
  return f.render();
}

}  // namespace layerprobe::svg

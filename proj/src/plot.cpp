#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "simlearn/errors.hpp"
#include "simlearn/experiment.hpp"

namespace simlearn {

namespace {

constexpr const char* kPalette[] = {"#1f77b4", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#17becf"};

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

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string tick(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

struct Range {
  double lo = 0.0, hi = 0.0;
  void include(double v) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  void pad() {
    if (hi - lo < 1e-12) {
      lo -= 0.5;
      hi += 0.5;
    } else {
      const double p = 0.05 * (hi - lo);
      lo -= p;
      hi += p;
    }
  }
};

}  // namespace

std::string render_svg(const std::vector<Series>& series, const PlotStyle& style) {
  if (series.empty()) throw InvalidArgument("emit_plot: no series");
  Range xr{series[0].x.empty() ? 0.0 : series[0].x[0], series[0].x.empty() ? 0.0 : series[0].x[0]};
  Range yr{series[0].y.empty() ? 0.0 : series[0].y[0], series[0].y.empty() ? 0.0 : series[0].y[0]};
  for (const auto& s : series) {
    if (s.x.empty()) throw InvalidArgument("emit_plot: series '" + s.name + "' is empty");
    if (s.x.size() != s.y.size() || (!s.err.empty() && s.err.size() != s.y.size()))
      throw InvalidArgument("emit_plot: series '" + s.name + "' has mismatched lengths");
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      const double e = s.err.empty() ? 0.0 : s.err[i];
      if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i]) || !std::isfinite(e))
        throw InvalidArgument("emit_plot: series '" + s.name + "' contains a non-finite value");
      xr.include(s.x[i]);
      yr.include(s.y[i] - e);
      yr.include(s.y[i] + e);
    }
  }
  if (style.baseline) {
    if (!std::isfinite(*style.baseline)) throw InvalidArgument("emit_plot: non-finite baseline");
    yr.include(*style.baseline);
  }
  xr.pad();
  yr.pad();

  const double left = 64, right = 150, top = 36, bottom = 52;
  const double pw = style.width - left - right, ph = style.height - top - bottom;
  auto px = [&](double x) { return left + (x - xr.lo) / (xr.hi - xr.lo) * pw; };
  auto py = [&](double y) { return top + (1.0 - (y - yr.lo) / (yr.hi - yr.lo)) * ph; };

  std::ostringstream o;
  o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << style.width << "\" height=\"" << style.height
    << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  o << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  if (!style.title.empty())
    o << "<text x=\"" << num(left + pw / 2) << "\" y=\"20\" text-anchor=\"middle\" font-size=\"14\">"
      << escape(style.title) << "</text>\n";
  // axes and ticks
  o << "<rect x=\"" << num(left) << "\" y=\"" << num(top) << "\" width=\"" << num(pw) << "\" height=\"" << num(ph)
    << "\" fill=\"none\" stroke=\"black\"/>\n";
  for (int i = 0; i <= 5; ++i) {
    const double xv = xr.lo + (xr.hi - xr.lo) * i / 5.0, yv = yr.lo + (yr.hi - yr.lo) * i / 5.0;
    o << "<line x1=\"" << num(px(xv)) << "\" y1=\"" << num(top + ph) << "\" x2=\"" << num(px(xv)) << "\" y2=\""
      << num(top + ph + 4) << "\" stroke=\"black\"/>";
    o << "<text x=\"" << num(px(xv)) << "\" y=\"" << num(top + ph + 18) << "\" text-anchor=\"middle\">" << tick(xv)
      << "</text>\n";
    o << "<line x1=\"" << num(left - 4) << "\" y1=\"" << num(py(yv)) << "\" x2=\"" << num(left) << "\" y2=\""
      << num(py(yv)) << "\" stroke=\"black\"/>";
    o << "<text x=\"" << num(left - 8) << "\" y=\"" << num(py(yv) + 4) << "\" text-anchor=\"end\">" << tick(yv)
      << "</text>\n";
  }
  o << "<text x=\"" << num(left + pw / 2) << "\" y=\"" << num(style.height - 10.0) << "\" text-anchor=\"middle\">"
    << escape(style.x_label) << "</text>\n";
  o << "<text transform=\"translate(16," << num(top + ph / 2) << ") rotate(-90)\" text-anchor=\"middle\">"
    << escape(style.y_label) << "</text>\n";

  double legend_y = top + 10;
  auto legend = [&](const std::string& color, const std::string& label, bool dashed) {
    o << "<line x1=\"" << num(left + pw + 12) << "\" y1=\"" << num(legend_y) << "\" x2=\"" << num(left + pw + 36)
      << "\" y2=\"" << num(legend_y) << "\" stroke=\"" << color << "\" stroke-width=\"2\""
      << (dashed ? " stroke-dasharray=\"6,4\"" : "") << "/>";
    o << "<text x=\"" << num(left + pw + 42) << "\" y=\"" << num(legend_y + 4) << "\">" << escape(label)
      << "</text>\n";
    legend_y += 18;
  };

  if (style.baseline) {
    const double y = py(*style.baseline);
    o << "<line x1=\"" << num(left) << "\" y1=\"" << num(y) << "\" x2=\"" << num(left + pw) << "\" y2=\"" << num(y)
      << "\" stroke=\"#d62728\" stroke-width=\"1.5\" stroke-dasharray=\"6,4\"/>\n";
  }
  for (std::size_t si = 0; si < series.size(); ++si) {
    const auto& s = series[si];
    const std::string color = kPalette[si % std::size(kPalette)];
    o << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"2\" points=\"";
    for (std::size_t i = 0; i < s.x.size(); ++i) o << (i ? " " : "") << num(px(s.x[i])) << "," << num(py(s.y[i]));
    o << "\"/>\n";
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      if (!s.err.empty() && s.err[i] > 0) {
        o << "<line x1=\"" << num(px(s.x[i])) << "\" y1=\"" << num(py(s.y[i] - s.err[i])) << "\" x2=\""
          << num(px(s.x[i])) << "\" y2=\"" << num(py(s.y[i] + s.err[i])) << "\" stroke=\"" << color << "\"/>";
      }
      o << "<circle cx=\"" << num(px(s.x[i])) << "\" cy=\"" << num(py(s.y[i])) << "\" r=\"3\" fill=\"" << color
        << "\"/>\n";
    }
    legend(color, s.name, false);
  }
  if (style.baseline) legend("#d62728", style.baseline_label, true);
  o << "</svg>\n";
  return o.str();
}

void emit_plot(const std::vector<Series>& series, const PlotStyle& style, const std::filesystem::path& path) {
  const std::string svg = render_svg(series, style);
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << svg;
}

}  // namespace simlearn

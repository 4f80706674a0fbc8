#include "hdclass/svg_plot.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "hdclass/errors.hpp"

namespace hdclass {

namespace {

constexpr double kPanelW = 420.0;
constexpr double kPanelH = 320.0;
constexpr double kMarginL = 60.0;
constexpr double kMarginR = 15.0;
constexpr double kMarginT = 30.0;
constexpr double kMarginB = 45.0;
constexpr const char* kColors[] = {"#c0392b", "#2471a3", "#1e8449", "#7d3c98", "#b9770e", "#555555"};

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      default: out += c;
    }
  }
  return out;
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

}  // namespace

void write_svg(const std::filesystem::path& path, const std::vector<PlotPanel>& panels) {
  std::ofstream out(path);
  if (!out) throw InvalidArgument("cannot write " + path.string());
  const double width = kPanelW * static_cast<double>(std::max<std::size_t>(panels.size(), 1));
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << kPanelH
      << "\" font-family=\"sans-serif\" font-size=\"11\">\n";
  out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";

  for (std::size_t k = 0; k < panels.size(); ++k) {
    const PlotPanel& panel = panels[k];
    const double ox = kPanelW * static_cast<double>(k);
    auto tx = [&](double x) { return panel.log_x ? std::log10(x) : x; };

    double xmin = HUGE_VAL, xmax = -HUGE_VAL, ymin = HUGE_VAL, ymax = -HUGE_VAL;
    for (const auto& s : panel.series) {
      for (std::size_t i = 0; i < s.x.size(); ++i) {
        if (!std::isfinite(s.y[i]) || (panel.log_x && !(s.x[i] > 0.0))) continue;
        xmin = std::min(xmin, tx(s.x[i]));
        xmax = std::max(xmax, tx(s.x[i]));
        ymin = std::min(ymin, s.y[i]);
        ymax = std::max(ymax, s.y[i]);
      }
      if (s.bars && s.x.size() > 1) {
        xmax = std::max(xmax, s.x.back() + (s.x[1] - s.x[0]));
        ymin = std::min(ymin, 0.0);
      }
    }
    if (!(xmin < xmax)) { xmin -= 1.0; xmax += 1.0; }
    if (!(ymin < ymax)) { ymin -= 1e-3; ymax += 1e-3; }
    const double pad = 0.05 * (ymax - ymin);
    ymin -= pad;
    ymax += pad;

    const double left = ox + kMarginL;
    const double right = ox + kPanelW - kMarginR;
    const double top = kMarginT;
    const double bottom = kPanelH - kMarginB;
    auto px = [&](double x) { return left + (tx(x) - xmin) / (xmax - xmin) * (right - left); };
    auto py = [&](double y) { return bottom - (y - ymin) / (ymax - ymin) * (bottom - top); };

    out << "<g>\n<text x=\"" << (left + right) / 2 << "\" y=\"18\" text-anchor=\"middle\">"
        << escape(panel.title) << "</text>\n";
    out << "<rect x=\"" << left << "\" y=\"" << top << "\" width=\"" << right - left
        << "\" height=\"" << bottom - top << "\" fill=\"none\" stroke=\"black\"/>\n";
    for (int t = 0; t <= 4; ++t) {
      const double xv = xmin + (xmax - xmin) * t / 4.0;
      const double yv = ymin + (ymax - ymin) * t / 4.0;
      const double sx = left + (right - left) * t / 4.0;
      const double sy = py(yv);
      out << "<text x=\"" << sx << "\" y=\"" << bottom + 15 << "\" text-anchor=\"middle\">"
          << fmt(panel.log_x ? std::pow(10.0, xv) : xv) << "</text>\n";
      out << "<text x=\"" << left - 5 << "\" y=\"" << sy + 4 << "\" text-anchor=\"end\">" << fmt(yv)
          << "</text>\n";
    }
    out << "<text x=\"" << (left + right) / 2 << "\" y=\"" << kPanelH - 8
        << "\" text-anchor=\"middle\">" << escape(panel.x_label) << "</text>\n";
    out << "<text transform=\"translate(" << ox + 14 << "," << (top + bottom) / 2
        << ") rotate(-90)\" text-anchor=\"middle\">" << escape(panel.y_label) << "</text>\n";

    for (std::size_t si = 0; si < panel.series.size(); ++si) {
      const PlotSeries& s = panel.series[si];
      const char* color = kColors[si % std::size(kColors)];
      if (s.bars && s.x.size() > 1) {
        const double w = s.x[1] - s.x[0];
        for (std::size_t i = 0; i < s.x.size(); ++i) {
          out << "<rect x=\"" << px(s.x[i]) << "\" y=\"" << py(s.y[i]) << "\" width=\""
              << px(s.x[i] + w) - px(s.x[i]) << "\" height=\"" << py(0.0) - py(s.y[i])
              << "\" fill=\"" << color << "\" fill-opacity=\"0.35\" stroke=\"" << color << "\"/>\n";
        }
      } else if (s.markers) {
        for (std::size_t i = 0; i < s.x.size(); ++i) {
          if (!std::isfinite(s.y[i])) continue;
          const double cx = px(s.x[i]);
          const double cy = py(s.y[i]);
          out << "<path d=\"M" << cx - 4 << ' ' << cy - 4 << " L" << cx + 4 << ' ' << cy + 4 << " M"
              << cx - 4 << ' ' << cy + 4 << " L" << cx + 4 << ' ' << cy - 4 << "\" stroke=\"" << color
              << "\" stroke-width=\"1.5\"/>\n";
        }
      } else {
        out << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
        for (std::size_t i = 0; i < s.x.size(); ++i)
          if (std::isfinite(s.y[i])) out << px(s.x[i]) << ',' << py(s.y[i]) << ' ';
        out << "\"/>\n";
      }
      const double ly = top + 14.0 * static_cast<double>(si + 1);
      out << "<text x=\"" << right - 6 << "\" y=\"" << ly << "\" text-anchor=\"end\" fill=\""
          << color << "\">" << escape(s.label) << "</text>\n";
    }
    out << "</g>\n";
  }
  out << "</svg>\n";
}

}  // namespace hdclass

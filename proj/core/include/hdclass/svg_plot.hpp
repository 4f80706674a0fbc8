#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace hdclass {

struct PlotSeries {
  std::string label;
  std::vector<double> x;
  std::vector<double> y;
  /// Markers only when true, a polyline otherwise.
  bool markers = false;
  /// Draw as histogram bars; x holds left bin edges and the last bin's right
  /// edge is x.back() + (x[1] - x[0]).
  bool bars = false;
};

struct PlotPanel {
  std::string title;
  std::string x_label;
  std::string y_label;
  bool log_x = false;
  std::vector<PlotSeries> series;
};

/// Writes panels side by side into one standalone SVG file.
void write_svg(const std::filesystem::path& path, const std::vector<PlotPanel>& panels);

}  // namespace hdclass

#pragma once

#include <string>

#include "flowmap/types.hpp"

namespace flowmap {

// Fixed-size raster scatter plot. Images are a viewing convenience; the
// CSVs emitted alongside are the record, so the writer stays minimal:
// truecolor PNG, stored (uncompressed) deflate blocks, no external codec.
struct ScatterStyle {
  int size = 800;          // square canvas, pixels
  double lo = -4.5;        // axis range, both coordinates
  double hi = 4.5;
  int point_radius = 1;    // pixels
};

// First two columns of points are plotted; labels (when given) pick the
// point color: unlabeled slate, class 0 blue, class 1 vermilion.
void write_scatter_png(const std::string& path, const Mat& points,
                       const IVec* labels = nullptr,
                       const ScatterStyle& style = {});

}  // namespace flowmap

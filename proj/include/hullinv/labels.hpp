#pragma once

// The regression target: control points of every section, flattened.
//
// Layout: section k occupies [k * 2(n+1), (k+1) * 2(n+1)), and inside a
// section the controls are interleaved as y0 z0 y1 z1 ...

#include <cstddef>
#include <span>
#include <vector>

#include "hullinv/hullgeom.hpp"

namespace hullinv {

struct LabelVector {
  int sections = 0;
  int controls = 0;  // n + 1 per section
  std::vector<double> values;

  std::size_t task_size() const { return 2 * static_cast<std::size_t>(controls); }
  std::size_t size() const { return values.size(); }
  std::span<const double> task(int k) const {
    return std::span<const double>(values).subspan(k * task_size(), task_size());
  }
};

inline std::size_t label_length(int sections, int controls) {
  return 2 * static_cast<std::size_t>(controls) * sections;
}

LabelVector labels_from_polygons(const std::vector<hullgeom::ControlPolygon>& polygons);
std::vector<hullgeom::ControlPolygon> polygons_from_labels(const LabelVector& label);

}  // namespace hullinv

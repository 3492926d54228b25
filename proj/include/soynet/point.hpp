#pragma once

namespace soynet {

/// Pixel coordinates; integer values are pixel centres.
struct Point {
  double x = 0.0;
  double y = 0.0;

  friend bool operator==(const Point&, const Point&) = default;
};

}  // namespace soynet

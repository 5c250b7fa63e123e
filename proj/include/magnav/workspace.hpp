#pragma once

#include <string>
#include <vector>

#include "magnav/image.hpp"

namespace magnav::env {

struct Extent {
  double x_min = 0, x_max = 0, y_min = 0, y_max = 0;

  double width() const { return x_max - x_min; }
  double height() const { return y_max - y_min; }
  bool contains(double x, double y) const {
    return x >= x_min && x <= x_max && y >= y_min && y <= y_max;
  }
};

// Occupancy raster tied to a metric extent.  Row 0 of the raster is the
// y_max edge; pixels below 128 are occupied.  Cells are square.
class WorkspaceMap {
 public:
  static WorkspaceMap load(const std::string& path, const Extent& extent);
  static WorkspaceMap from_image(const Image8& img, const Extent& extent);

  // Anywhere outside the extent counts as occupied.
  bool occupied_at(double x, double y) const;

  bool cell_occupied(int col, int row) const {
    return occupied_[static_cast<size_t>(row) * cols_ + col] != 0;
  }

  int cols() const { return cols_; }
  int rows() const { return rows_; }
  double resolution() const { return resolution_; }
  const Extent& extent() const { return extent_; }
  size_t occupied_count() const { return occupied_count_; }

 private:
  std::vector<uint8_t> occupied_;
  int cols_ = 0, rows_ = 0;
  double resolution_ = 0;
  Extent extent_;
  size_t occupied_count_ = 0;
};

}  // namespace magnav::env

namespace magnav {
using env::Extent;
using env::WorkspaceMap;
}  // namespace magnav

#pragma once

#include <array>
#include <vector>

namespace nsms {

/// Interior face between two cells; `left` has the smaller coordinate along
/// `axis`. `mac_index` addresses the staggered velocity component normal to
/// the face (u for axis 0, v for axis 1).
struct Face {
  int left;
  int right;
  int axis;
  int mac_index;
};

/// Uniform cell-centered grid on [0,Lx] or [0,Lx]x[0,Ly].
/// Cells are numbered i + nx*j.
class Grid {
 public:
  static Grid line(double length, int cells);
  static Grid rectangle(double lx, double ly, int nx, int ny);

  int dim() const { return dim_; }
  int cells(int axis) const { return cells_[axis]; }
  double extent(int axis) const { return extents_[axis]; }
  double spacing(int axis) const { return spacing_[axis]; }
  int nx() const { return cells_[0]; }
  int ny() const { return dim_ == 2 ? cells_[1] : 1; }
  int cell_count() const { return nx() * ny(); }
  double cell_volume() const { return spacing_[0] * (dim_ == 2 ? spacing_[1] : 1.0); }
  double measure() const { return extents_[0] * (dim_ == 2 ? extents_[1] : 1.0); }
  int index(int i, int j = 0) const { return i + nx() * j; }

  /// Coordinate of a cell center along `axis`.
  double center(int axis, int k) const { return (k + 0.5) * spacing_[axis]; }

  const std::vector<Face>& interior_faces() const { return faces_; }

  bool operator==(const Grid& other) const {
    return dim_ == other.dim_ && cells_ == other.cells_ && extents_ == other.extents_;
  }

 private:
  Grid(int dim, std::array<double, 2> extents, std::array<int, 2> cells);

  int dim_;
  std::array<double, 2> extents_;
  std::array<int, 2> cells_;
  std::array<double, 2> spacing_;
  std::vector<Face> faces_;
};

}  // namespace nsms

#include "nsms/grid.hpp"

#include <cmath>
#include <string>

#include "nsms/errors.hpp"

namespace nsms {

namespace {
constexpr int kMinCells = 4;
}

Grid::Grid(int dim, std::array<double, 2> extents, std::array<int, 2> cells)
    : dim_(dim), extents_(extents), cells_(cells), spacing_{1.0, 1.0} {
  for (int a = 0; a < dim; ++a) {
    if (!(extents[a] > 0.0) || !std::isfinite(extents[a])) {
      throw InvalidInput("grid extent along axis " + std::to_string(a) + " must be positive");
    }
    if (cells[a] < kMinCells) {
      throw InvalidInput("grid needs at least " + std::to_string(kMinCells) +
                         " cells per axis");
    }
    spacing_[a] = extents[a] / cells[a];
  }
  const int nx = cells_[0];
  const int ny = dim == 2 ? cells_[1] : 1;
  for (int j = 0; j < ny; ++j) {
    for (int i = 0; i + 1 < nx; ++i) {
      faces_.push_back({i + nx * j, i + 1 + nx * j, 0, (i + 1) + (nx + 1) * j});
    }
  }
  if (dim == 2) {
    for (int j = 0; j + 1 < ny; ++j) {
      for (int i = 0; i < nx; ++i) {
        faces_.push_back({i + nx * j, i + nx * (j + 1), 1, i + nx * (j + 1)});
      }
    }
  }
}

Grid Grid::line(double length, int cells) { return Grid(1, {length, 0.0}, {cells, 1}); }

Grid Grid::rectangle(double lx, double ly, int nx, int ny) {
  return Grid(2, {lx, ly}, {nx, ny});
}

}  // namespace nsms

#pragma once

#include <cmath>
#include <cstddef>
#include <optional>
#include <vector>

#include "sylva/common/geometry.hpp"

namespace sylva {

struct CellIndex {
  int x = 0;
  int y = 0;
  bool operator==(const CellIndex&) const = default;
};

/// Dense row-major 2D grid anchored at the lower-left corner of cell (0, 0).
template <class T>
class Grid2D {
 public:
  Grid2D() = default;
  Grid2D(Vec2 origin, double resolution, int nx, int ny, T fill = T{})
      : origin_(origin), resolution_(resolution), nx_(nx), ny_(ny),
        data_(static_cast<std::size_t>(nx) * static_cast<std::size_t>(ny), fill) {}

  const Vec2& origin() const { return origin_; }
  double resolution() const { return resolution_; }
  int nx() const { return nx_; }
  int ny() const { return ny_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  bool inside(int ix, int iy) const { return ix >= 0 && iy >= 0 && ix < nx_ && iy < ny_; }
  bool inside(CellIndex c) const { return inside(c.x, c.y); }

  std::size_t linear(int ix, int iy) const {
    return static_cast<std::size_t>(iy) * static_cast<std::size_t>(nx_) + static_cast<std::size_t>(ix);
  }
  CellIndex unlinear(std::size_t i) const {
    return {static_cast<int>(i % static_cast<std::size_t>(nx_)), static_cast<int>(i / static_cast<std::size_t>(nx_))};
  }

  T& at(int ix, int iy) { return data_[linear(ix, iy)]; }
  const T& at(int ix, int iy) const { return data_[linear(ix, iy)]; }
  T& at(CellIndex c) { return at(c.x, c.y); }
  const T& at(CellIndex c) const { return at(c.x, c.y); }
  T& operator[](std::size_t i) { return data_[i]; }
  const T& operator[](std::size_t i) const { return data_[i]; }

  /// Cell containing `p`, unclamped (may be outside the grid).
  CellIndex cell_of(const Vec2& p) const {
    return {static_cast<int>(std::floor((p.x() - origin_.x()) / resolution_)),
            static_cast<int>(std::floor((p.y() - origin_.y()) / resolution_))};
  }
  std::optional<CellIndex> find_cell(const Vec2& p) const {
    const CellIndex c = cell_of(p);
    if (!inside(c)) {
      return std::nullopt;
    }
    return c;
  }
  Vec2 center(int ix, int iy) const {
    return {origin_.x() + (ix + 0.5) * resolution_, origin_.y() + (iy + 0.5) * resolution_};
  }
  Vec2 center(CellIndex c) const { return center(c.x, c.y); }

  std::vector<T>& data() { return data_; }
  const std::vector<T>& data() const { return data_; }

  bool operator==(const Grid2D&) const = default;

 private:
  Vec2 origin_ = Vec2::Zero();
  double resolution_ = 1.0;
  int nx_ = 0;
  int ny_ = 0;
  std::vector<T> data_;
};

}  // namespace sylva

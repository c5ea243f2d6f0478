#pragma once
// Dyadic cubes and axis-aligned boxes on the periodic grid.
//
// A dyadic cube is identified by its level (log2 of the side length in
// units, so level 0 is a unit cube and negative levels subdivide it) and the
// cell coordinates of its lower corner.  Aligned cubes never wrap; concentric
// dilates like 3Q are general boxes and may wrap around the torus.

#include <array>
#include <cstdint>
#include <vector>

#include "grid.hpp"

namespace radonlab {

struct DyadicCube {
  int level = 0;
  std::array<int64_t, 2> corner{0, 0};  // cell coordinates
  bool operator==(const DyadicCube& o) const {
    return level == o.level && corner == o.corner;
  }
};

inline int64_t side_cells(const GridSpec& g, int level) {
  if (level + g.s < 0 || level + g.s > g.K)
    throw guard_error("side_cells: level out of range for grid");
  return int64_t(1) << (level + g.s);
}

// The aligned cube of the given level containing a cell.
inline DyadicCube cube_at(const GridSpec& g, int level, std::array<int64_t, 2> cell) {
  int64_t side = side_cells(g, level);
  DyadicCube q;
  q.level = level;
  q.corner = {cell[0] - (cell[0] & (side - 1)), cell[1] - (cell[1] & (side - 1))};
  if (g.n == 1) q.corner[1] = 0;
  return q;
}

inline bool cube_aligned(const GridSpec& g, const DyadicCube& q) {
  int64_t side = side_cells(g, q.level);
  bool ok = (q.corner[0] & (side - 1)) == 0 && q.corner[0] >= 0 && q.corner[0] < g.N;
  if (g.n == 2)
    ok = ok && (q.corner[1] & (side - 1)) == 0 && q.corner[1] >= 0 && q.corner[1] < g.N;
  else
    ok = ok && q.corner[1] == 0;
  return ok;
}

// Axis-aligned box in cell coordinates; may wrap around the torus.
struct Box {
  std::array<int64_t, 2> corner{0, 0};
  int64_t side = 0;
};

inline Box box_of(const GridSpec& g, const DyadicCube& q) {
  return Box{q.corner, side_cells(g, q.level)};
}

// Concentric odd dilate fQ (f = 3, 5, ...).
inline Box dilate_box(const GridSpec& g, const DyadicCube& q, int factor) {
  int64_t side = side_cells(g, q.level);
  int64_t off = (int64_t(factor - 1) * side) / 2;
  if ((int64_t(factor - 1) * side) % 2 != 0)
    throw guard_error("dilate_box: offset not integral at this scale");
  Box b;
  b.side = factor * side;
  if (b.side > g.N) throw guard_error("dilate_box: dilate exceeds the torus");
  b.corner = {g.wrap(q.corner[0] - off), g.n == 2 ? g.wrap(q.corner[1] - off) : 0};
  return b;
}

inline bool box_contains(const GridSpec& g, const Box& b,
                         std::array<int64_t, 2> cell) {
  auto in = [&](int64_t c, int64_t corner) {
    return g.wrap(c - corner) < b.side;
  };
  bool ok = in(cell[0], b.corner[0]);
  if (g.n == 2) ok = ok && in(cell[1], b.corner[1]);
  return ok;
}

// Flat indices of a box's cells, row-major in box-local order.
inline std::vector<int64_t> cells_of_box(const GridSpec& g, const Box& b) {
  std::vector<int64_t> out;
  if (g.n == 1) {
    out.reserve(size_t(b.side));
    for (int64_t i = 0; i < b.side; ++i) out.push_back(g.wrap(b.corner[0] + i));
  } else {
    out.reserve(size_t(b.side) * size_t(b.side));
    for (int64_t j = 0; j < b.side; ++j) {
      int64_t y = g.wrap(b.corner[1] + j);
      for (int64_t i = 0; i < b.side; ++i)
        out.push_back(y * g.N + g.wrap(b.corner[0] + i));
    }
  }
  return out;
}

inline std::vector<int64_t> cells_of_cube(const GridSpec& g, const DyadicCube& q) {
  return cells_of_box(g, box_of(g, q));
}

inline double cube_volume(const GridSpec& g, const DyadicCube& q) {
  return std::ldexp(1.0, q.level * g.n);
}

inline std::vector<DyadicCube> cube_children(const GridSpec& g, const DyadicCube& q) {
  int64_t half = side_cells(g, q.level) / 2;
  if (half < 1) throw guard_error("cube_children: cube already at cell scale");
  std::vector<DyadicCube> kids;
  int ny = g.n == 2 ? 2 : 1;
  for (int dy = 0; dy < ny; ++dy)
    for (int dx = 0; dx < 2; ++dx)
      kids.push_back(DyadicCube{q.level - 1,
                                {q.corner[0] + dx * half, q.corner[1] + dy * half}});
  return kids;
}

// Bit mask over the grid's cells with a maintained population count.
struct CellMask {
  GridSpec spec;
  std::vector<uint8_t> m;
  int64_t count = 0;
  explicit CellMask(const GridSpec& g) : spec(g), m(size_t(g.cells()), 0) {}
  bool test(int64_t flat) const { return m[size_t(flat)] != 0; }
  void set(int64_t flat) {
    if (!m[size_t(flat)]) {
      m[size_t(flat)] = 1;
      ++count;
    }
  }
  void clear(int64_t flat) {
    if (m[size_t(flat)]) {
      m[size_t(flat)] = 0;
      --count;
    }
  }
  std::vector<int64_t> cells() const {
    std::vector<int64_t> out;
    out.reserve(size_t(count));
    for (int64_t i = 0; i < int64_t(m.size()); ++i)
      if (m[size_t(i)]) out.push_back(i);
    return out;
  }
};

inline CellMask mask_of_box(const GridSpec& g, const Box& b) {
  CellMask mk(g);
  for (int64_t c : cells_of_box(g, b)) mk.set(c);
  return mk;
}

}  // namespace radonlab

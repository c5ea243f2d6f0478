#pragma once
// Local p-averages with logarithmic level slices, exceptional sets with
// adaptive threshold selection, Whitney covers with an exact integer distance
// window, and Calderon-Zygmund decompositions.

#include <limits>

#include "operators.hpp"

namespace radonlab {

inline double local_p_average(const GridFunction& f,
                              const std::vector<int64_t>& cells, double p) {
  if (!(p >= 1.0)) throw guard_error("local_p_average: need p >= 1");
  if (cells.empty()) throw guard_error("local_p_average: empty cell set");
  Accum s;
  for (int64_t c : cells) s.add(std::pow(std::fabs(f.v[size_t(c)]), p));
  return std::pow(s.value() / double(cells.size()), 1.0 / p);
}

inline double local_p_average(const GridFunction& f, const DyadicCube& Q, double p) {
  return local_p_average(f, cells_of_cube(f.spec, Q), p);
}

inline double local_p_average(const GridFunction& f, const Box& b, double p) {
  return local_p_average(f, cells_of_box(f.spec, b), p);
}

constexpr int kSliceCap = 64;

// Slice index of a sample against a reference average: 0 when |v| <= avg,
// else the unique m with 2^{m-1} avg < |v| <= 2^m avg.  Pure comparisons
// against ldexp(avg, m), so boundary samples land deterministically.
inline int slice_index(double v, double avg) {
  double a = std::fabs(v);
  if (a <= avg) return 0;
  int m = 1;
  while (a > std::ldexp(avg, m)) {
    ++m;
    if (m > kSliceCap)
      throw guard_error("slice_index: dynamic range beyond 2^64 slice cap");
  }
  return m;
}

struct LevelSlice {
  DyadicCube Q;
  double p = 0;
  int m = 0;
  double ref_avg = 0;                               // <|f|>_{Q,p}
  std::vector<std::pair<int64_t, double>> samples;  // (flat cell, value)
  bool empty() const { return samples.empty(); }
};

inline LevelSlice level_slice(const GridFunction& f, const DyadicCube& Q, double p,
                              int m) {
  if (m < 0) throw guard_error("level_slice: m >= 0");
  LevelSlice s;
  s.Q = Q;
  s.p = p;
  s.m = m;
  auto cells = cells_of_cube(f.spec, Q);
  s.ref_avg = local_p_average(f, cells, p);
  for (int64_t c : cells) {
    double v = f.v[size_t(c)];
    if (v != 0.0 && s.ref_avg > 0.0 && slice_index(v, s.ref_avg) == m)
      s.samples.push_back({c, v});
  }
  return s;
}

inline GridFunction slice_function(const GridSpec& g, const LevelSlice& s) {
  GridFunction f(g);
  for (const auto& [c, v] : s.samples) f.v[size_t(c)] = v;
  return f;
}

// <|f|>_{Q,p+} = sum_m (m+1)^w <|f^m_Q|>_{Q,p}, the slice-weighted average;
// w defaults to 4.  Each slice average is normalized by the full cube.
inline double plus_average(const GridFunction& f, const std::vector<int64_t>& cells,
                           double p, int weight_exp = 4) {
  double avg = local_p_average(f, cells, p);
  if (!(avg > 0.0)) return 0.0;
  std::array<Accum, kSliceCap + 1> bands{};
  for (int64_t c : cells) {
    double v = f.v[size_t(c)];
    if (v != 0.0)
      bands[size_t(slice_index(v, avg))].add(std::pow(std::fabs(v), p));
  }
  Accum total;
  for (int m = 0; m <= kSliceCap; ++m) {
    double sp = bands[size_t(m)].value();
    if (sp > 0.0)
      total.add(std::pow(double(m + 1), double(weight_exp)) *
                std::pow(sp / double(cells.size()), 1.0 / p));
  }
  return total.value();
}

inline double plus_average(const GridFunction& f, const DyadicCube& Q, double p,
                           int weight_exp = 4) {
  return plus_average(f, cells_of_cube(f.spec, Q), p, weight_exp);
}

inline double plus_average(const GridFunction& f, const Box& b, double p,
                           int weight_exp = 4) {
  return plus_average(f, cells_of_box(f.spec, b), p, weight_exp);
}

namespace detail {

constexpr double kEdtInf = 1e18;

// Felzenszwalb-Huttenlocher lower envelope of parabolas for one row; entries
// at kEdtInf carry no parabola.
inline void edt_row(const std::vector<double>& fin, std::vector<double>& dout) {
  int n = int(fin.size());
  dout.assign(size_t(n), kEdtInf);
  std::vector<int> idx;
  idx.reserve(size_t(n));
  for (int i = 0; i < n; ++i)
    if (fin[size_t(i)] < kEdtInf) idx.push_back(i);
  if (idx.empty()) return;
  std::vector<int> v(idx.size());
  std::vector<double> z(idx.size() + 1);
  int k = 0;
  v[0] = idx[0];
  z[0] = -kEdtInf;
  z[1] = kEdtInf;
  for (size_t t = 1; t < idx.size(); ++t) {
    int q = idx[t];
    double s = 0.0;
    while (true) {
      int r = v[size_t(k)];
      s = ((fin[size_t(q)] + double(q) * q) - (fin[size_t(r)] + double(r) * r)) /
          (2.0 * q - 2.0 * r);
      if (k > 0 && s <= z[size_t(k)])
        --k;
      else
        break;
    }
    ++k;
    v[size_t(k)] = q;
    z[size_t(k)] = s;
    z[size_t(k) + 1] = kEdtInf;
  }
  int kk = 0;
  for (int q = 0; q < n; ++q) {
    while (z[size_t(kk) + 1] < double(q)) ++kk;
    double d = double(q) - v[size_t(kk)];
    dout[size_t(q)] = d * d + fin[size_t(v[size_t(kk)])];
  }
}

// Periodic squared distance transform: run the row transform on three tiled
// copies and keep the middle one.
inline void edt_row_periodic(std::vector<double>& row) {
  int n = int(row.size());
  std::vector<double> f(size_t(3 * n)), d(size_t(3 * n));
  for (int c = 0; c < 3; ++c)
    for (int i = 0; i < n; ++i) f[size_t(c * n + i)] = row[size_t(i)];
  edt_row(f, d);
  for (int i = 0; i < n; ++i) row[size_t(i)] = d[size_t(n + i)];
}

// Exact squared Euclidean distance (in cell units, between cell centers) from
// every cell to the nearest cell outside the mask, on the torus.
inline std::vector<int64_t> edt_squared_to_complement(const CellMask& E) {
  const GridSpec& g = E.spec;
  int64_t n_cells = g.cells();
  std::vector<double> d(static_cast<size_t>(n_cells));
  for (int64_t i = 0; i < n_cells; ++i) d[size_t(i)] = E.test(i) ? kEdtInf : 0.0;
  if (g.n == 1) {
    edt_row_periodic(d);
  } else {
    std::vector<double> col(static_cast<size_t>(g.N));
    for (int64_t y = 0; y < g.N; ++y) {
      std::vector<double> row(d.begin() + y * g.N, d.begin() + (y + 1) * g.N);
      edt_row_periodic(row);
      std::copy(row.begin(), row.end(), d.begin() + y * g.N);
    }
    for (int64_t x = 0; x < g.N; ++x) {
      for (int64_t y = 0; y < g.N; ++y) col[size_t(y)] = d[size_t(y * g.N + x)];
      edt_row_periodic(col);
      for (int64_t y = 0; y < g.N; ++y) d[size_t(y * g.N + x)] = col[size_t(y)];
    }
  }
  std::vector<int64_t> out(static_cast<size_t>(n_cells));
  for (int64_t i = 0; i < n_cells; ++i)
    out[size_t(i)] = d[size_t(i)] >= kEdtInf ? std::numeric_limits<int64_t>::max()
                                             : llround(d[size_t(i)]);
  return out;
}

}  // namespace detail

struct WhitneyCube {
  DyadicCube q;
  bool boundary_layer = false;
  int64_t dist2 = 0;  // squared cell distance from the cube to E^c
};

struct WhitneyCover {
  std::vector<WhitneyCube> cubes;
  CellMask E;
  explicit WhitneyCover(const GridSpec& g) : E(g) {}
};

// Whitney cover of E: every cell picks the largest dyadic ancestor that is
// contained in E and satisfies the lower distance bound
//     (5 sqrt(n) side)^2 <= dist^2(Q, E^c),
// evaluated with exact integers.  The selected cubes are automatically
// pairwise disjoint (a larger valid cube through any cell would contradict
// maximality) and satisfy the upper window bound
//     dist^2(Q, E^c) < (11 sqrt(n) side)^2
// because the parent of a maximal cube fails containment or the lower bound.
// Cells whose single-cell cube already fails the lower bound (closer than
// 5 sqrt(n) cells to E^c) become single-cell cubes flagged boundary_layer,
// keeping the union exact.
inline WhitneyCover whitney(const CellMask& E) {
  const GridSpec& g = E.spec;
  WhitneyCover cover(g);
  cover.E = E;
  if (E.count == 0) return cover;
  if (E.count == g.cells())
    throw guard_error("whitney: exceptional set covers the whole domain");

  auto d2 = detail::edt_squared_to_complement(E);

  // Min-pyramids over aligned 2^t blocks: smallest d2 in the block, and
  // whether the block lies entirely inside E.
  int tmax = g.K;
  std::vector<std::vector<int64_t>> pyr_d2(size_t(tmax) + 1);
  std::vector<std::vector<uint8_t>> pyr_in(size_t(tmax) + 1);
  pyr_d2[0] = d2;
  pyr_in[0].resize(size_t(g.cells()));
  for (int64_t i = 0; i < g.cells(); ++i) pyr_in[0][size_t(i)] = E.test(i) ? 1 : 0;
  for (int t = 1; t <= tmax; ++t) {
    int64_t w = g.N >> t;  // blocks per axis
    if (w < 1) {
      pyr_d2[size_t(t)].clear();
      break;
    }
    int64_t prev_w = g.N >> (t - 1);
    int64_t blocks = g.n == 1 ? w : w * w;
    pyr_d2[size_t(t)].assign(size_t(blocks), std::numeric_limits<int64_t>::max());
    pyr_in[size_t(t)].assign(size_t(blocks), 1);
    for (int64_t b = 0; b < blocks; ++b) {
      int64_t bx = g.n == 1 ? b : b % w;
      int64_t by = g.n == 1 ? 0 : b / w;
      for (int dy = 0; dy < (g.n == 2 ? 2 : 1); ++dy)
        for (int dx = 0; dx < 2; ++dx) {
          int64_t src = g.n == 1 ? 2 * bx + dx : (2 * by + dy) * prev_w + 2 * bx + dx;
          pyr_d2[size_t(t)][size_t(b)] =
              std::min(pyr_d2[size_t(t)][size_t(b)], pyr_d2[size_t(t) - 1][size_t(src)]);
          pyr_in[size_t(t)][size_t(b)] &= pyr_in[size_t(t) - 1][size_t(src)];
        }
    }
  }

  auto block_valid = [&](int t, int64_t bx, int64_t by) {
    // contained in E and lower window bound 25 n side^2 <= dist^2
    int64_t w = g.N >> t;
    int64_t b = g.n == 1 ? bx : by * w + bx;
    if (!pyr_in[size_t(t)][size_t(b)]) return false;
    int64_t side2 = int64_t(1) << (2 * t);
    int64_t lo = 25 * int64_t(g.n) * side2;
    return pyr_d2[size_t(t)][size_t(b)] >= lo;
  };
  auto block_d2 = [&](int t, int64_t bx, int64_t by) {
    int64_t w = g.N >> t;
    return pyr_d2[size_t(t)][size_t(g.n == 1 ? bx : by * w + bx)];
  };

  std::vector<uint8_t> taken(size_t(g.cells()), 0);
  for (int64_t flat = 0; flat < g.cells(); ++flat) {
    if (!E.test(flat) || taken[size_t(flat)]) continue;
    auto c = g.coords(flat);
    if (!block_valid(0, c[0], c[1])) {
      WhitneyCube wc;
      wc.q = DyadicCube{-g.s, {c[0], g.n == 2 ? c[1] : 0}};
      wc.boundary_layer = true;
      wc.dist2 = d2[size_t(flat)];
      cover.cubes.push_back(wc);
      taken[size_t(flat)] = 1;
      continue;
    }
    int t = 0;
    while (t + 1 <= tmax && (g.N >> (t + 1)) >= 1 &&
           block_valid(t + 1, c[0] >> (t + 1), g.n == 2 ? c[1] >> (t + 1) : 0))
      ++t;
    WhitneyCube wc;
    int64_t side = int64_t(1) << t;
    wc.q = DyadicCube{t - g.s, {c[0] - (c[0] & (side - 1)),
                                g.n == 2 ? c[1] - (c[1] & (side - 1)) : 0}};
    wc.boundary_layer = false;
    wc.dist2 = block_d2(t, c[0] >> t, g.n == 2 ? c[1] >> t : 0);
    int64_t hi = 121 * int64_t(g.n) * (side * side);
    if (wc.dist2 >= hi)
      throw std::logic_error("whitney: upper window bound violated");
    cover.cubes.push_back(wc);
    for (int64_t cc : cells_of_cube(g, wc.q)) taken[size_t(cc)] = 1;
  }
  return cover;
}

// Exact-window report for a cover: interior cubes must satisfy
// 25 n side^2 <= dist^2 < 121 n side^2; boundary-layer cubes only the upper
// half.  Recomputes distances from the stored mask.
inline bool whitney_window_ok(const WhitneyCover& cover) {
  const GridSpec& g = cover.E.spec;
  if (cover.cubes.empty()) return true;
  auto d2 = detail::edt_squared_to_complement(cover.E);
  for (const auto& wc : cover.cubes) {
    int64_t best = std::numeric_limits<int64_t>::max();
    for (int64_t c : cells_of_cube(g, wc.q)) best = std::min(best, d2[size_t(c)]);
    int64_t side = side_cells(g, wc.q.level);
    int64_t side2 = side * side;
    if (best != wc.dist2) return false;
    if (best >= 121 * int64_t(g.n) * side2) return false;
    if (!wc.boundary_layer && best < 25 * int64_t(g.n) * side2) return false;
  }
  return true;
}

struct CZBadPart {
  DyadicCube Q;
  double mean = 0;                                  // signed cell mean over Q
  std::vector<std::pair<int64_t, double>> samples;  // f - mean on Q
};

struct CZDecomposition {
  GridFunction good;
  std::vector<CZBadPart> bad;
};

// g = f off the cover, the signed cell mean on each cube; b_Q = 1_Q (f - mean).
inline CZDecomposition cz_decompose(const GridFunction& f, const WhitneyCover& cover) {
  CZDecomposition out{f, {}};
  for (const auto& wc : cover.cubes) {
    auto cells = cells_of_cube(f.spec, wc.q);
    Accum s;
    for (int64_t c : cells) s.add(f.v[size_t(c)]);
    CZBadPart b;
    b.Q = wc.q;
    b.mean = s.value() / double(cells.size());
    for (int64_t c : cells) {
      b.samples.push_back({c, f.v[size_t(c)] - b.mean});
      out.good.v[size_t(c)] = b.mean;
    }
    out.bad.push_back(std::move(b));
  }
  return out;
}

// Precomputed threshold fields for the exceptional set.  For each side the
// field R is the pointwise max of every maximal-function ratio whose level
// set enters E, so E(D) = {R1 > D} u {R2 > D} for every candidate D.
struct ExceptionalFields {
  GridFunction R1, R2;
  double avg1 = 0;  // <|f1|>_{Q0,p}
  double avg2 = 0;  // <|f2|>_{3Q0,q'}
  int slices1 = 0, slices2 = 0;
};

namespace detail {

inline void fold_ratio(GridFunction& R, const GridFunction& field, double denom) {
  if (!(denom > 0.0)) return;
  for (size_t i = 0; i < R.v.size(); ++i)
    R.v[i] = std::max(R.v[i], field.v[i] / denom);
}

// One side of the exceptional set: f against its support region and exponent.
inline int side_ratio_field(GridFunction& R, const GridFunction& f,
                            const std::vector<int64_t>& region_cells, double expnt,
                            const DiscreteMeasure& sigma, int N1, int N2,
                            const DyadicCube& Q0, double& avg_out) {
  const GridSpec& g = f.spec;
  double avg = local_p_average(f, region_cells, expnt);
  avg_out = avg;
  if (!(avg > 0.0)) return 0;
  fold_ratio(R, maximal_fn(f, expnt), avg);
  fold_ratio(R, maximal_fn(high_T_star(f, sigma, N1, N2, Q0), 1.0), avg);
  // nonempty slices, each against its own (m+1)-inflated average
  std::array<Accum, kSliceCap + 1> bands{};
  for (int64_t c : region_cells) {
    double v = f.v[size_t(c)];
    if (v != 0.0) bands[size_t(slice_index(v, avg))].add(std::pow(std::fabs(v), expnt));
  }
  int nonempty = 0;
  for (int m = 0; m <= kSliceCap; ++m) {
    if (!(bands[size_t(m)].value() > 0.0)) continue;
    ++nonempty;
    double slice_avg =
        std::pow(bands[size_t(m)].value() / double(region_cells.size()), 1.0 / expnt);
    GridFunction fm(g);
    for (int64_t c : region_cells) {
      double v = f.v[size_t(c)];
      if (v != 0.0 && slice_index(v, avg) == m) fm.v[size_t(c)] = v;
    }
    fold_ratio(R, maximal_fn(fm, expnt), double(m + 1) * slice_avg);
  }
  return nonempty;
}

}  // namespace detail

// Assemble both ratio fields once; thresholding at any D is then a sweep.
// f1 must be supported in Q0 and f2 in 3Q0.
inline ExceptionalFields exceptional_fields(const GridFunction& f1,
                                            const GridFunction& f2,
                                            const DiscreteMeasure& sigma,
                                            const ExponentPair& exps, int N1, int N2,
                                            const DyadicCube& Q0) {
  const GridSpec& g = f1.spec;
  if (!(f2.spec == g)) throw guard_error("exceptional_fields: grid mismatch");
  Box q0 = box_of(g, Q0), q3 = dilate_box(g, Q0, 3);
  for (int64_t i = 0; i < g.cells(); ++i) {
    auto c = g.coords(i);
    if (f1.v[size_t(i)] != 0.0 && !box_contains(g, q0, c))
      throw guard_error("exceptional_fields: f1 not supported in Q0");
    if (f2.v[size_t(i)] != 0.0 && !box_contains(g, q3, c))
      throw guard_error("exceptional_fields: f2 not supported in 3Q0");
  }
  ExceptionalFields out{GridFunction(g), GridFunction(g)};
  out.slices1 = detail::side_ratio_field(out.R1, f1, cells_of_box(g, q0), exps.p,
                                         sigma, N1, N2, Q0, out.avg1);
  out.slices2 = detail::side_ratio_field(out.R2, f2, cells_of_box(g, q3),
                                         exps.q_prime(), sigma, N1, N2, Q0, out.avg2);
  return out;
}

inline CellMask exceptional_mask(const ExceptionalFields& fields, double D) {
  const GridSpec& g = fields.R1.spec;
  CellMask E(g);
  for (int64_t i = 0; i < g.cells(); ++i)
    if (fields.R1.v[size_t(i)] > D || fields.R2.v[size_t(i)] > D) E.set(i);
  return E;
}

inline CellMask exceptional_set(const GridFunction& f1, const GridFunction& f2,
                                const DiscreteMeasure& sigma, const ExponentPair& exps,
                                double D, const DyadicCube& Q0, int N1, int N2) {
  return exceptional_mask(exceptional_fields(f1, f2, sigma, exps, N1, N2, Q0), D);
}

struct DStep {
  double D = 0;
  int64_t E_count = 0;
  bool inside_6Q0 = false;
};

struct DSelection {
  double D = 0;
  CellMask E;
  std::vector<DStep> trace;
  explicit DSelection(const GridSpec& g) : E(g) {}
};

// Smallest power-of-two D (doubling from 2) whose exceptional set has at most
// half of Q0's cells and stays inside 6Q0.
inline DSelection select_D(const ExceptionalFields& fields, const DyadicCube& Q0) {
  const GridSpec& g = fields.R1.spec;
  DSelection sel(g);
  Box q6 = dilate_box(g, Q0, 6);
  int64_t half = side_cells(g, Q0.level);
  int64_t budget = (g.n == 1 ? half : half * half) / 2;
  double D = 2.0;
  for (int iter = 0; iter < 4200; ++iter) {
    CellMask E = exceptional_mask(fields, D);
    bool inside = true;
    for (int64_t c : E.cells())
      if (!box_contains(g, q6, g.coords(c))) {
        inside = false;
        break;
      }
    sel.trace.push_back({D, E.count, inside});
    if (E.count <= budget && inside) {
      sel.D = D;
      sel.E = std::move(E);
      return sel;
    }
    D *= 2.0;
  }
  throw std::logic_error("select_D: no admissible threshold found");
}

}  // namespace radonlab

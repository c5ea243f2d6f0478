#pragma once
// Periodic dyadic grids: the computational substrate.
//
// A grid has N = 2^K sample cells per axis on the torus of side N/u units,
// with u = 2^s cells per unit length.  Cell i sits at the physical point i/u
// and owns the half-open box [i/u, (i+1)/u); integrals are cell sums weighted
// by the cell volume u^-n.  A grid is "padded" when s <= K-4 (domain side
// >= 16 units); the cube machinery (dilates, exceptional sets, the sparse
// recursion) requires padding, plain convolution and spectra do not.

#include <array>
#include <cmath>
#include <complex>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace radonlab {

struct guard_error : std::runtime_error {
  explicit guard_error(const std::string& w) : std::runtime_error(w) {}
};

// Compensated (Kahan) accumulator; keeps long cell sums deterministic and
// accurate independent of grid size.
struct Accum {
  double s = 0.0, c = 0.0;
  void add(double x) {
    double y = x - c;
    double t = s + y;
    c = (t - s) - y;
    s = t;
  }
  double value() const { return s; }
};

struct GridSpec {
  int n = 0;  // dimension, 1 or 2
  int K = 0;  // log2 cells per axis
  int s = 0;  // log2 cells per unit length
  int N = 0;  // 2^K
  int u = 0;  // 2^s

  int64_t cells() const { return n == 1 ? N : int64_t(N) * N; }
  double cell_width() const { return 1.0 / u; }
  double cell_volume() const { return n == 1 ? 1.0 / u : 1.0 / (double(u) * u); }
  double side_units() const { return double(N) / u; }
  bool padded() const { return s <= K - 4; }

  int wrap(int64_t a) const {
    int64_t r = a % N;
    return int(r < 0 ? r + N : r);
  }
  // flat index from (possibly out-of-range) cell coordinates
  int64_t idx(int64_t x) const { return wrap(x); }
  int64_t idx(int64_t x, int64_t y) const { return int64_t(wrap(y)) * N + wrap(x); }
  int64_t idx(const std::array<int64_t, 2>& c) const {
    return n == 1 ? idx(c[0]) : idx(c[0], c[1]);
  }
  std::array<int64_t, 2> coords(int64_t flat) const {
    if (n == 1) return {flat, 0};
    return {flat % N, flat / N};
  }

  bool operator==(const GridSpec& o) const {
    return n == o.n && K == o.K && s == o.s;
  }
  bool operator!=(const GridSpec& o) const { return !(*this == o); }
};

namespace detail {
// No padding-tier checks; used for the recursion's local windows.
inline GridSpec make_grid_unchecked(int n, int K, int s) {
  GridSpec g;
  g.n = n;
  g.K = K;
  g.s = s;
  g.N = 1 << K;
  g.u = 1 << s;
  return g;
}
}  // namespace detail

inline GridSpec make_grid(int n, int K, int s) {
  if (n != 1 && n != 2) throw guard_error("make_grid: dimension must be 1 or 2");
  if (K < 3 || K > 24) throw guard_error("make_grid: K out of range [3,24]");
  if (n == 2 && K > 14) throw guard_error("make_grid: K > 14 in 2D (memory guard)");
  if (s < 3) throw guard_error("make_grid: s < 3 (sub-unit resolution floor)");
  if (s > K) throw guard_error("make_grid: s > K (domain smaller than one unit)");
  int s_max = K - 4 < 3 ? 3 : K - 4;
  if (s > s_max)
    throw guard_error("make_grid: padding guard s <= K-4 violated (s=" +
                      std::to_string(s) + ", K=" + std::to_string(K) + ")");
  return detail::make_grid_unchecked(n, K, s);
}

struct GridFunction {
  GridSpec spec;
  std::vector<double> v;

  GridFunction() = default;
  explicit GridFunction(const GridSpec& g, double fill = 0.0)
      : spec(g), v(size_t(g.cells()), fill) {}

  double& at(int64_t x) { return v[size_t(spec.idx(x))]; }
  double& at(int64_t x, int64_t y) { return v[size_t(spec.idx(x, y))]; }
  double at(int64_t x) const { return v[size_t(spec.idx(x))]; }
  double at(int64_t x, int64_t y) const { return v[size_t(spec.idx(x, y))]; }
};

// L2-type pairing: cell-volume weighted dot product, fixed summation order.
inline double pairing(const GridFunction& f, const GridFunction& g) {
  if (f.spec != g.spec) throw guard_error("pairing: mismatched grids");
  Accum a;
  for (size_t i = 0; i < f.v.size(); ++i) a.add(f.v[i] * g.v[i]);
  return a.value() * f.spec.cell_volume();
}

inline double norm_p(const GridFunction& f, double p) {
  Accum a;
  for (double x : f.v) a.add(std::pow(std::fabs(x), p));
  return std::pow(a.value() * f.spec.cell_volume(), 1.0 / p);
}

inline double sup_norm(const GridFunction& f) {
  double m = 0.0;
  for (double x : f.v) m = std::max(m, std::fabs(x));
  return m;
}
}  // namespace radonlab

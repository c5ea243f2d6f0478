#pragma once
// Atom measures on the lattice and their exact spectra.
//
// A measure is a finite list of weighted atoms on the 1/u lattice, stored as
// signed lattice coordinates so it is independent of any particular grid
// size N.  Convolution against a grid function is a weighted shift-sum,
// evaluated spectrally; the measure's Fourier transform is the exact atom
// sum, so the spectral route agrees with direct summation to rounding.

#include <cmath>
#include <cstdint>
#include <functional>

#include "fft.hpp"
#include "grid.hpp"

namespace radonlab {

struct MeasureAtom {
  std::array<int64_t, 2> c{0, 0};  // lattice coordinates (physical position c/u)
  double w = 0.0;
};

struct DiscreteMeasure {
  int n = 0;
  int u = 0;
  std::vector<MeasureAtom> atoms;
  bool mean_zero = false;

  double support_radius() const {  // units
    double m2 = 0.0;
    for (const auto& a : atoms) {
      double r2 = double(a.c[0]) * a.c[0] + double(a.c[1]) * a.c[1];
      m2 = std::max(m2, r2);
    }
    return std::sqrt(m2) / u;
  }
  int64_t support_radius_cells2() const {  // max squared radius, exact
    int64_t m2 = 0;
    for (const auto& a : atoms)
      m2 = std::max(m2, a.c[0] * a.c[0] + a.c[1] * a.c[1]);
    return m2;
  }
  double total_weight() const {
    Accum s;
    for (const auto& a : atoms) s.add(a.w);
    return s.value();
  }
  double total_mass() const {
    Accum s;
    for (const auto& a : atoms) s.add(std::fabs(a.w));
    return s.value();
  }
  bool compatible(const GridSpec& g) const { return n == g.n && u == g.u; }
};

// Uniform measure on the circle of the given radius: M equispaced points
// snapped to the nearest lattice point, equal weights 1/M.  Snapping can push
// an atom up to half a cell diagonal outside the radius; the declared support
// radius is always recomputed from the snapped atoms.
inline DiscreteMeasure circle_measure(const GridSpec& g, double radius = 1.0,
                                      int M = 0) {
  if (g.n != 2) throw guard_error("circle_measure: needs a 2D grid");
  if (M == 0) M = 16 * g.u;
  if (M < 16 * g.u)
    throw guard_error("circle_measure: M below 16*u resolution floor");
  DiscreteMeasure m;
  m.n = 2;
  m.u = g.u;
  m.atoms.resize(size_t(M));
  for (int i = 0; i < M; ++i) {
    double th = 2.0 * M_PI * i / M;
    m.atoms[size_t(i)].c = {llround(radius * std::cos(th) * g.u),
                            llround(radius * std::sin(th) * g.u)};
    m.atoms[size_t(i)].w = 1.0 / M;
  }
  return m;
}

inline double bump_profile(double x) {
  double t = 1.0 - x * x;
  return t > 0.0 ? std::exp(1.0 - 1.0 / t) : 0.0;
}

// Smooth bump density on [-1,1] sampled at every lattice point, weights
// normalized to total mass one.
inline DiscreteMeasure interval_bump_measure(
    const GridSpec& g, const std::function<double(double)>& profile = bump_profile) {
  if (g.n != 1) throw guard_error("interval_bump_measure: needs a 1D grid");
  DiscreteMeasure m;
  m.n = 1;
  m.u = g.u;
  Accum total;
  for (int64_t l = -g.u; l <= g.u; ++l) {
    double w = profile(double(l) / g.u);
    if (w != 0.0) {
      m.atoms.push_back({{l, 0}, w});
      total.add(w);
    }
  }
  if (!(total.value() > 0.0))
    throw guard_error("interval_bump_measure: profile has no mass on [-1,1]");
  for (auto& a : m.atoms) a.w /= total.value();
  return m;
}

// x-marginal of the circle measure (arcsine law on [-1,1]); shares the
// circle's |xi|^{-1/2} spectral decay and is the 1D stand-in wherever a
// curved-measure scaling test needs fine frequency resolution.
inline DiscreteMeasure projected_circle_measure(const GridSpec& g, int M = 0) {
  if (g.n != 1) throw guard_error("projected_circle_measure: needs a 1D grid");
  if (M == 0) M = 16 * g.u;
  if (M < 16 * g.u)
    throw guard_error("projected_circle_measure: M below 16*u resolution floor");
  DiscreteMeasure m;
  m.n = 1;
  m.u = g.u;
  m.atoms.resize(size_t(M));
  for (int i = 0; i < M; ++i) {
    double th = 2.0 * M_PI * i / M;
    m.atoms[size_t(i)].c = {llround(std::cos(th) * g.u), 0};
    m.atoms[size_t(i)].w = 1.0 / M;
  }
  return m;
}

// Multiply atom weights by a density and project out the mean exactly:
// the constant (sum rho*w)/(sum w) is subtracted from rho, and the tiny
// float residual of the new total weight is folded back uniformly so the
// zeroth Fourier coefficient vanishes to full precision.
inline DiscreteMeasure modulate_mean_zero(
    const DiscreteMeasure& m,
    const std::function<double(std::array<double, 2>)>& density) {
  double W = m.total_weight();
  if (std::fabs(W) < 1e-12 * std::max(1.0, m.total_mass()))
    throw guard_error("modulate_mean_zero: total weight too close to zero");
  Accum rw;
  for (const auto& a : m.atoms)
    rw.add(density({double(a.c[0]) / m.u, double(a.c[1]) / m.u}) * a.w);
  double c = rw.value() / W;
  DiscreteMeasure out = m;
  for (auto& a : out.atoms)
    a.w = (density({double(a.c[0]) / m.u, double(a.c[1]) / m.u}) - c) * a.w;
  double r = out.total_weight();
  if (!out.atoms.empty()) {
    double corr = r / double(out.atoms.size());
    for (auto& a : out.atoms) a.w -= corr;
  }
  out.mean_zero = true;
  return out;
}

inline double coordinate_density(std::array<double, 2> x) { return x[0]; }

// Dyadic dilate: atom positions scaled by 2^j and snapped back to the
// lattice.  ldexp keeps the scaling exact, so j >= 0 moves atoms without any
// rounding and j = 0 is the identity.
//   resolution floor: scaled support radius must be >= 8 cells;
//   padding cap:      scaled support radius must be <= N/8 cells on the
//                     target grid, so cube dilates and convolution supports
//                     at this scale cannot wrap.
inline DiscreteMeasure dilate(const DiscreteMeasure& m, int j, const GridSpec& g) {
  if (!m.compatible(g)) throw guard_error("dilate: measure/grid mismatch");
  if (m.atoms.empty()) throw guard_error("dilate: empty measure");
  double r_cells = std::sqrt(double(m.support_radius_cells2()));
  double scaled = std::ldexp(r_cells, j);
  if (scaled < 8.0)
    throw guard_error("dilate: scale 2^" + std::to_string(j) +
                      " drops the support below the 8-cell resolution floor");
  if (scaled > double(g.N) / 8.0)
    throw guard_error("dilate: scale 2^" + std::to_string(j) +
                      " exceeds the N/8-cell padding cap");
  DiscreteMeasure out = m;
  for (auto& a : out.atoms) {
    a.c[0] = llround(std::ldexp(double(a.c[0]), j));
    a.c[1] = llround(std::ldexp(double(a.c[1]), j));
  }
  return out;
}

inline DiscreteMeasure reflect(const DiscreteMeasure& m) {
  DiscreteMeasure out = m;
  for (auto& a : out.atoms) {
    a.c[0] = -a.c[0];
    a.c[1] = -a.c[1];
  }
  return out;
}

// Exact Fourier transform of the atom sum at arbitrary physical frequencies.
inline std::vector<cplx> measure_spectrum(
    const DiscreteMeasure& m, const std::vector<std::array<double, 2>>& xis) {
  std::vector<cplx> out(xis.size());
  detail::parallel_rows(int(xis.size()), [&](int q) {
    Accum re, im;
    const auto& xi = xis[size_t(q)];
    for (const auto& a : m.atoms) {
      double ph = -2.0 * M_PI *
                  (xi[0] * (double(a.c[0]) / m.u) + xi[1] * (double(a.c[1]) / m.u));
      re.add(a.w * std::cos(ph));
      im.add(a.w * std::sin(ph));
    }
    out[size_t(q)] = {re.value(), im.value()};
  });
  return out;
}

struct DecayFit {
  double alpha_hat = 0.0;
  double intercept = 0.0;  // log2-log2 fit offset
  double residual = 0.0;   // RMS of log2 residuals
  double xi_lo = 0.0, xi_hi = 0.0;
  std::vector<double> annulus_center;  // log2 of geometric center
  std::vector<double> annulus_max;
};

// Least-squares power-law fit to per-annulus spectrum maxima over the dyadic
// annuli covering [1/2, u/4].  u >= 32 gives the minimum of four annuli; the
// cap at u/4 keeps lattice-snapping damping out of the fit.
inline DecayFit estimate_decay(const DiscreteMeasure& m) {
  if (m.u < 32) throw guard_error("estimate_decay: needs resolution u >= 32");
  int a_lo = -1;
  int a_hi = 0;
  while ((1 << (a_hi + 1)) * 4 <= m.u) ++a_hi;  // largest a with 2^{a+1} <= u/4
  int count = a_hi - a_lo + 1;
  if (count < 4) throw guard_error("estimate_decay: fewer than 4 annuli in range");

  DecayFit fit;
  fit.xi_lo = 0.5;
  fit.xi_hi = double(m.u) / 4.0;
  const int n_rad = m.n == 1 ? 192 : 96;
  const int n_ang = m.n == 1 ? 2 : 64;
  for (int a = a_lo; a <= a_hi; ++a) {
    double lo = std::ldexp(1.0, a), hi = std::ldexp(1.0, a + 1) * (1.0 - 1e-12);
    std::vector<std::array<double, 2>> xis;
    xis.reserve(size_t(n_rad) * n_ang);
    for (int i = 0; i < n_rad; ++i) {
      double r = lo * std::pow(hi / lo, double(i) / (n_rad - 1));
      if (m.n == 1) {
        xis.push_back({r, 0.0});
        xis.push_back({-r, 0.0});
      } else {
        for (int t = 0; t < n_ang; ++t) {
          double th = 2.0 * M_PI * t / n_ang;
          xis.push_back({r * std::cos(th), r * std::sin(th)});
        }
      }
    }
    auto vals = measure_spectrum(m, xis);
    double best = 0.0;
    for (const auto& z : vals) best = std::max(best, std::abs(z));
    fit.annulus_center.push_back(a + 0.5);
    fit.annulus_max.push_back(best);
  }

  // slope fit in log2-log2
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (size_t i = 0; i < fit.annulus_center.size(); ++i) {
    double x = fit.annulus_center[i], y = std::log2(fit.annulus_max[i]);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  double nn = double(fit.annulus_center.size());
  double slope = (nn * sxy - sx * sy) / (nn * sxx - sx * sx);
  double inter = (sy - slope * sx) / nn;
  fit.alpha_hat = -slope;
  fit.intercept = inter;
  double ss = 0;
  for (size_t i = 0; i < fit.annulus_center.size(); ++i) {
    double r = std::log2(fit.annulus_max[i]) - (slope * fit.annulus_center[i] + inter);
    ss += r * r;
  }
  fit.residual = std::sqrt(ss / nn);
  return fit;
}

// Spectral samples of the measure at every grid frequency: the unnormalized
// DFT of the atoms placed on the grid (weights of colliding atoms add).
inline std::vector<cplx> measure_grid_dft(const DiscreteMeasure& m,
                                          const GridSpec& g) {
  if (!m.compatible(g)) throw guard_error("measure_grid_dft: measure/grid mismatch");
  std::vector<cplx> d(size_t(g.cells()), cplx{0.0, 0.0});
  for (const auto& a : m.atoms) {
    if (std::llabs(a.c[0]) > g.N / 2 || std::llabs(a.c[1]) > g.N / 2)
      throw guard_error("measure_grid_dft: atom outside representable torus");
    d[size_t(g.idx(a.c))] += a.w;
  }
  dft_grid(d, g, false);
  return d;
}

// f * m as a weighted shift-sum, evaluated spectrally.
inline GridFunction convolve(const GridFunction& f, const DiscreteMeasure& m) {
  if (!m.compatible(f.spec)) throw guard_error("convolve: measure/grid mismatch");
  auto mhat = measure_grid_dft(m, f.spec);
  std::vector<cplx> F(f.v.begin(), f.v.end());
  dft_grid(F, f.spec, false);
  for (size_t i = 0; i < F.size(); ++i) F[i] *= mhat[i];
  dft_grid(F, f.spec, true);
  GridFunction out(f.spec);
  for (size_t i = 0; i < F.size(); ++i) out.v[i] = F[i].real();
  return out;
}

}  // namespace radonlab

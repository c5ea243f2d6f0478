#pragma once
// Discretized transforms: scale-sums of measure convolutions, their maximal
// variants, ball averages and maximal functions, and operator-norm probes.

#include <map>
#include <memory>
#include <mutex>

#include "cubes.hpp"
#include "measure.hpp"
#include "rng.hpp"

namespace radonlab {

struct ExponentPair {
  double p = 0, q = 0;
  ExponentPair() = default;
  ExponentPair(double p_, double q_) : p(p_), q(q_) {
    if (!(p > 1.0) || !(q >= p) || !std::isfinite(q))
      throw guard_error("ExponentPair: need 1 < p <= q < inf");
  }
  double p_prime() const { return p / (p - 1.0); }
  double q_prime() const { return q / (q - 1.0); }
};

// 1/p_t = (1-t)/p + t/2, 1/q_t = (1-t)/q + t/2: the segment from (p,q)
// toward the L^2 point traced by interpolation.
inline ExponentPair theta_exponents(double p, double q, double theta) {
  ExponentPair base(p, q);  // validates ordering
  if (theta < 0.0 || theta > 1.0) throw guard_error("theta_exponents: theta in [0,1]");
  double ip = (1.0 - theta) / base.p + theta / 2.0;
  double iq = (1.0 - theta) / base.q + theta / 2.0;
  return ExponentPair(1.0 / ip, 1.0 / iq);
}

struct EpsilonSigns {
  int N1 = 0, N2 = 0;
  std::vector<double> values;  // index j - N1
  EpsilonSigns() : values{0.0} {}
  EpsilonSigns(int n1, int n2, std::vector<double> vals)
      : N1(n1), N2(n2), values(std::move(vals)) {
    if (N1 > N2) throw guard_error("EpsilonSigns: N1 > N2");
    if (values.size() != size_t(N2 - N1 + 1))
      throw guard_error("EpsilonSigns: value count mismatch");
    for (double v : values)
      if (!(std::fabs(v) <= 1.0)) throw guard_error("EpsilonSigns: |eps_j| > 1");
  }
  static EpsilonSigns alternating(int n1, int n2) {
    std::vector<double> v(static_cast<size_t>(n2 - n1 + 1));
    for (size_t i = 0; i < v.size(); ++i) v[i] = (i % 2 == 0) ? 1.0 : -1.0;
    return EpsilonSigns(n1, n2, std::move(v));
  }
  static EpsilonSigns random_signs(int n1, int n2, uint64_t seed) {
    Rng rng(seed);
    std::vector<double> v(static_cast<size_t>(n2 - n1 + 1));
    for (auto& x : v) x = rng.sign();
    return EpsilonSigns(n1, n2, std::move(v));
  }
  static EpsilonSigns zeros(int n1, int n2) {
    return EpsilonSigns(n1, n2, std::vector<double>(size_t(n2 - n1 + 1), 0.0));
  }
  double value(int j) const {
    return (j < N1 || j > N2) ? 0.0 : values[size_t(j - N1)];
  }
};

namespace detail {

// Spectrum (real, by symmetry) of the strict-ball indicator of radius r
// cells, cached per (n, K, r).
inline const std::vector<double>& ball_kernel_spectrum(const GridSpec& g,
                                                      int64_t r_cells) {
  static std::mutex mu;
  static std::map<std::array<int64_t, 3>, std::unique_ptr<std::vector<double>>> cache;
  if (r_cells < 1 || r_cells > g.N / 2)
    throw guard_error("ball_kernel_spectrum: radius out of range");
  std::array<int64_t, 3> key{g.n, g.K, r_cells};
  std::lock_guard<std::mutex> lock(mu);
  auto it = cache.find(key);
  if (it != cache.end()) return *it->second;

  std::vector<cplx> d(size_t(g.cells()), cplx{0.0, 0.0});
  int64_t R = r_cells - 1;  // strict inequality
  if (g.n == 1) {
    for (int64_t x = -R; x <= R; ++x) d[size_t(g.wrap(x))] = 1.0;
  } else {
    for (int64_t y = -R; y <= R; ++y)
      for (int64_t x = -R; x <= R; ++x)
        if (x * x + y * y < r_cells * r_cells)
          d[size_t(g.wrap(y) * g.N + g.wrap(x))] = 1.0;
  }
  dft_grid(d, g, false);
  auto vec = std::make_unique<std::vector<double>>(d.size());
  for (size_t i = 0; i < d.size(); ++i) (*vec)[i] = d[i].real();
  auto& slot = cache[key];
  slot = std::move(vec);
  return *slot;
}

inline int64_t ball_count(const GridSpec& g, int64_t r_cells) {
  // spectrum at frequency zero is the cell count
  return llround(ball_kernel_spectrum(g, r_cells)[0]);
}

}  // namespace detail

// Ball p-average at a single point: mean of |f|^p over lattice points within
// physical distance r (strict), then the 1/p root.  Direct sum; the grid
// fields below use the spectral route over the same strict balls.
inline double local_average(const GridFunction& f, std::array<int64_t, 2> x,
                            double r, double p) {
  const GridSpec& g = f.spec;
  if (!(r > 0.0) || !(p >= 1.0)) throw guard_error("local_average: need r > 0, p >= 1");
  double rc = r * g.u;  // radius in cells
  if (rc > g.N / 2.0)
    throw guard_error("local_average: radius beyond half the torus");
  int64_t R = int64_t(std::ceil(rc));
  Accum sum;
  int64_t count = 0;
  auto visit = [&](int64_t dx, int64_t dy) {
    double v = g.n == 1 ? f.v[size_t(g.wrap(x[0] + dx))]
                        : f.v[size_t(g.wrap(x[1] + dy) * g.N + g.wrap(x[0] + dx))];
    sum.add(std::pow(std::fabs(v), p));
    ++count;
  };
  if (g.n == 1) {
    int64_t lim = std::min<int64_t>(R, g.N / 2);
    for (int64_t dx = -lim; dx <= lim; ++dx)
      if (double(dx) * dx < rc * rc || dx == 0) visit(dx, 0);
  } else {
    int64_t lim = std::min<int64_t>(R, g.N / 2);
    for (int64_t dy = -lim; dy <= lim; ++dy)
      for (int64_t dx = -lim; dx <= lim; ++dx)
        if (double(dx) * dx + double(dy) * dy < rc * rc || (dx == 0 && dy == 0))
          visit(dx, dy);
  }
  if (count == 0) throw guard_error("local_average: empty ball");
  return std::pow(sum.value() / count, 1.0 / p);
}

// Maximal function over the dyadic radius set {2^i/u : one cell <= radius <=
// domain/4}: for each radius, a spectral ball convolution of |f|^p; the
// output is the pointwise max of the per-radius averages.
inline GridFunction maximal_fn(const GridFunction& f, double p) {
  const GridSpec& g = f.spec;
  if (!(p >= 1.0)) throw guard_error("maximal_fn: need p >= 1");
  std::vector<cplx> P(size_t(g.cells()));
  for (size_t i = 0; i < P.size(); ++i)
    P[i] = std::pow(std::fabs(f.v[i]), p);
  dft_grid(P, g, false);

  GridFunction out(g);
  std::vector<cplx> buf(P.size());
  for (int i = 0; i <= g.K - 2; ++i) {
    int64_t rc = int64_t(1) << i;
    const auto& ker = detail::ball_kernel_spectrum(g, rc);
    double inv_count = 1.0 / double(detail::ball_count(g, rc));
    for (size_t t = 0; t < P.size(); ++t) buf[t] = P[t] * ker[t];
    dft_grid(buf, g, true);
    for (size_t t = 0; t < P.size(); ++t) {
      double avg = std::max(0.0, buf[t].real() * inv_count);
      out.v[t] = std::max(out.v[t], std::pow(avg, 1.0 / p));
    }
  }
  return out;
}

// T[f] = sum_j eps_j (mu_j * f): one spectral multiplier assembled over the
// scale range in fixed order, then a single inverse transform.
inline GridFunction radon_T(const GridFunction& f, const DiscreteMeasure& mu,
                            const EpsilonSigns& eps) {
  const GridSpec& g = f.spec;
  if (!mu.mean_zero) throw guard_error("radon_T: measure not flagged mean_zero");
  std::vector<cplx> mult(size_t(g.cells()), cplx{0.0, 0.0});
  for (int j = eps.N1; j <= eps.N2; ++j) {
    auto mj = dilate(mu, j, g);  // guards every scale in the range
    double e = eps.value(j);
    auto mhat = measure_grid_dft(mj, g);
    for (size_t i = 0; i < mult.size(); ++i) mult[i] += e * mhat[i];
  }
  std::vector<cplx> F(f.v.begin(), f.v.end());
  dft_grid(F, g, false);
  for (size_t i = 0; i < F.size(); ++i) F[i] *= mult[i];
  dft_grid(F, g, true);
  GridFunction out(g);
  for (size_t i = 0; i < F.size(); ++i) out.v[i] = F[i].real();
  return out;
}

// T*[f] = sup_j (sigma_j * |f|) over j in [j_lo, j_hi].
inline GridFunction maximal_T_star(const GridFunction& f, const DiscreteMeasure& sigma,
                                   int j_lo, int j_hi) {
  const GridSpec& g = f.spec;
  if (j_lo > j_hi) throw guard_error("maximal_T_star: empty scale range");
  for (const auto& a : sigma.atoms)
    if (a.w < 0.0) throw guard_error("maximal_T_star: measure has negative weights");
  std::vector<cplx> F(size_t(g.cells()));
  for (size_t i = 0; i < F.size(); ++i) F[i] = std::fabs(f.v[i]);
  dft_grid(F, g, false);
  GridFunction out(g);
  std::vector<cplx> buf(F.size());
  for (int j = j_lo; j <= j_hi; ++j) {
    auto mhat = measure_grid_dft(dilate(sigma, j, g), g);
    for (size_t i = 0; i < F.size(); ++i) buf[i] = F[i] * mhat[i];
    dft_grid(buf, g, true);
    for (size_t i = 0; i < F.size(); ++i)
      out.v[i] = std::max(out.v[i], buf[i].real());
  }
  return out;
}

// T_Q[f] = sum over scales 2^j <= l(Q) of eps_j mu_j * (1_Q f); empty scale
// range gives the zero function.
inline GridFunction truncated_T_Q(const GridFunction& f, const DyadicCube& Q,
                                  const DiscreteMeasure& mu, const EpsilonSigns& eps) {
  const GridSpec& g = f.spec;
  int hi = std::min(eps.N2, Q.level);
  GridFunction cut(g);
  for (int64_t c : cells_of_cube(g, Q)) cut.v[size_t(c)] = f.v[size_t(c)];
  if (hi < eps.N1) return GridFunction(g);  // null operator
  EpsilonSigns trunc(eps.N1, hi,
                     std::vector<double>(eps.values.begin(),
                                         eps.values.begin() + (hi - eps.N1 + 1)));
  return radon_T(cut, mu, trunc);
}

// sup over scales 2^j <= l(Q0) of sigma_j * |f|; zero when no scale remains.
inline GridFunction high_T_star(const GridFunction& f, const DiscreteMeasure& sigma,
                                int N1, int N2, const DyadicCube& Q0) {
  int hi = std::min(N2, Q0.level);
  if (hi < N1) return GridFunction(f.spec);
  return maximal_T_star(f, sigma, N1, hi);
}

enum class TrialFamily { standard, unit_boxes };

inline GridFunction tensor_bump(const GridSpec& g, std::array<int64_t, 2> center,
                                std::array<double, 2> width_cells) {
  GridFunction f(g);
  for (int64_t flat = 0; flat < g.cells(); ++flat) {
    auto c = g.coords(flat);
    double dx = double(g.wrap(c[0] - center[0]));
    if (dx > g.N / 2.0) dx -= g.N;
    double v = bump_profile(dx / width_cells[0]);
    if (g.n == 2) {
      double dy = double(g.wrap(c[1] - center[1]));
      if (dy > g.N / 2.0) dy -= g.N;
      v *= bump_profile(dy / width_cells[1]);
    }
    f.v[size_t(flat)] = v;
  }
  return f;
}

inline GridFunction box_indicator(const GridSpec& g, std::array<int64_t, 2> corner,
                                  std::array<int64_t, 2> sides) {
  GridFunction f(g);
  for (int64_t j = 0; j < (g.n == 2 ? sides[1] : 1); ++j)
    for (int64_t i = 0; i < sides[0]; ++i) {
      int64_t x = g.wrap(corner[0] + i);
      f.v[size_t(g.n == 1 ? x : g.wrap(corner[1] + j) * g.N + x)] = 1.0;
    }
  return f;
}

// Empirical lower bound on the L^p -> L^q norm of f -> m*f at unit scale:
// max of ||m*f||_q / ||f||_p over a deterministic trial family.
//   standard:   tensor bumps at widths {1/4, 1/2, 1} units, a single cell,
//               axis-aligned Knapp slabs (1-cell thickness, aspect ratios
//               {1, sqrt(u), u}), plus seeded random bumps and slabs;
//   unit_boxes: indicators of axis-aligned cubes with side >= 3 units
//               (used for the q-monotonicity check with probability measures).
inline std::vector<double> improving_norm_table(const GridSpec& g,
                                                const DiscreteMeasure& m, double p,
                                                double q, int trials, uint64_t seed,
                                                TrialFamily family = TrialFamily::standard) {
  if (trials < 10) throw guard_error("improving_norm_estimate: need trials >= 10");
  if (!(p >= 1.0) || !(q >= 1.0))
    throw guard_error("improving_norm_estimate: exponents below 1");
  std::vector<GridFunction> fs;
  Rng rng(seed);
  if (family == TrialFamily::standard) {
    for (double wu : {0.25, 0.5, 1.0}) {
      double w = wu * g.u;
      fs.push_back(tensor_bump(g, {0, 0}, {w, w}));
    }
    fs.push_back(box_indicator(g, {0, 0}, {1, 1}));
    if (g.n == 2) {
      for (double aspect : {1.0, std::sqrt(double(g.u)), double(g.u)}) {
        int64_t len = std::min<int64_t>(g.N, llround(std::max(1.0, aspect)));
        fs.push_back(box_indicator(g, {0, 0}, {len, 1}));
        fs.push_back(box_indicator(g, {0, 0}, {1, len}));
      }
    }
    int base = int(fs.size());
    for (int t = base; t < trials; ++t) {
      if (t % 2 == 0) {
        double wx = std::exp(rng.uniform(std::log(0.125), std::log(1.0))) * g.u;
        double wy = g.n == 2
                        ? std::exp(rng.uniform(std::log(0.125), std::log(1.0))) * g.u
                        : wx;
        fs.push_back(tensor_bump(g, {0, 0}, {wx, wy}));
      } else if (g.n == 2) {
        double len = std::exp(rng.uniform(0.0, std::log(double(g.u))));
        int64_t L = std::min<int64_t>(g.N, llround(std::max(1.0, len)));
        if (t % 4 == 1)
          fs.push_back(box_indicator(g, {0, 0}, {L, 1}));
        else
          fs.push_back(box_indicator(g, {0, 0}, {1, L}));
      } else {
        int64_t L = 1 + int64_t(rng.below(uint64_t(g.u)));
        fs.push_back(box_indicator(g, {0, 0}, {L, 1}));
      }
    }
  } else {
    int64_t max_side_units = g.side_units() / 2;
    for (int t = 0; t < trials; ++t) {
      int64_t side_u = 3 + int64_t(rng.below(uint64_t(std::max<int64_t>(1, max_side_units - 2))));
      int64_t side = side_u * g.u;
      std::array<int64_t, 2> sides{side, side};
      fs.push_back(box_indicator(g, {0, 0}, sides));
    }
  }

  std::vector<double> out;
  out.reserve(fs.size());
  for (const auto& f : fs) {
    double den = norm_p(f, p);
    out.push_back(den > 0.0 ? norm_p(convolve(f, m), q) / den : 0.0);
  }
  return out;
}

inline double improving_norm_estimate(const GridSpec& g, const DiscreteMeasure& m,
                                      double p, double q, int trials, uint64_t seed,
                                      TrialFamily family = TrialFamily::standard) {
  double best = 0.0;
  for (double r : improving_norm_table(g, m, p, q, trials, seed, family))
    best = std::max(best, r);
  return best;
}

}  // namespace radonlab

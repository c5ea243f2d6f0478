#pragma once
// Frequency-space regularization: a smooth radial partition of unity into
// dyadic annuli, the per-annulus pieces of the scale-sum operator, and the
// two scaling-law probes (L2 decay in k, weak-(1,1) growth in 1-k) plus the
// weak L(logL)^r level-set check.

#include "operators.hpp"

namespace radonlab {

// Radial profile of the low-pass symbol: 1 on [0,1], a C-infinity bridge
// exp(1 - 1/(1-(rho-1)^2)) on (1,2), 0 beyond.
inline double eta_tilde_profile(double rho) {
  if (rho <= 1.0) return 1.0;
  if (rho >= 2.0) return 0.0;
  double t = rho - 1.0;
  return std::exp(1.0 - 1.0 / (1.0 - t * t));
}

// Annulus pieces eta_k for k_min <= k <= 0 with hat(eta_k) supported in
// 2^{-k} <= |xi| <= 2^{2-k}; together with the low-pass tilde symbol and the
// high-frequency remainder they partition unity exactly at every frequency:
//   tilde(xi) + sum_k eta_k(xi) + remainder(xi) = 1.
struct RegularizerFamily {
  GridSpec spec;
  int k_min = -1;

  double tilde_hat(double rho) const { return eta_tilde_profile(rho); }
  double piece_hat(int k, double rho) const {
    if (k < k_min || k > 0) throw guard_error("piece_hat: k outside family range");
    return eta_tilde_profile(std::ldexp(rho, k - 1)) -
           eta_tilde_profile(std::ldexp(rho, k));
  }
  double remainder_hat(double rho) const {
    return 1.0 - eta_tilde_profile(std::ldexp(rho, k_min - 1));
  }
};

inline RegularizerFamily build_regularizers(const GridSpec& spec, int k_min) {
  if (k_min > -1) throw guard_error("build_regularizers: need k_min <= -1");
  if (std::ldexp(1.0, -k_min) > double(spec.u) / 4.0)
    throw guard_error("build_regularizers: k_min annulus beyond u/4 resolution");
  return RegularizerFamily{spec, k_min};
}

namespace detail {

// Multiplier of sum_j eps_j (radial weight at scale j) mu_j, assembled in
// fixed scale order; weight takes the physical |xi| already dilated by 2^j.
template <class Weight>
std::vector<cplx> scale_sum_multiplier(const GridSpec& g, const DiscreteMeasure& mu,
                                       const EpsilonSigns& eps, Weight&& weight) {
  std::vector<cplx> mult(size_t(g.cells()), cplx{0.0, 0.0});
  for (int j = eps.N1; j <= eps.N2; ++j) {
    auto mhat = measure_grid_dft(dilate(mu, j, g), g);
    double e = eps.value(j);
    SpectralFunction probe{g, {}};
    for (int64_t i = 0; i < g.cells(); ++i) {
      auto xi = probe.xi(i);
      double rho = std::ldexp(std::hypot(xi[0], xi[1]), j);
      mult[size_t(i)] += e * weight(rho) * mhat[size_t(i)];
    }
  }
  return mult;
}

inline GridFunction apply_multiplier(const GridFunction& f,
                                     const std::vector<cplx>& mult) {
  std::vector<cplx> F(f.v.begin(), f.v.end());
  dft_grid(F, f.spec, false);
  for (size_t i = 0; i < F.size(); ++i) F[i] *= mult[i];
  dft_grid(F, f.spec, true);
  GridFunction out(f.spec);
  for (size_t i = 0; i < F.size(); ++i) out.v[i] = F[i].real();
  return out;
}

}  // namespace detail

// T^k[f] = sum_j eps_j (mu * eta_k)_j * f via its exact grid multiplier.
inline GridFunction piece_operator_Tk(const GridFunction& f, const DiscreteMeasure& mu,
                                      const EpsilonSigns& eps,
                                      const RegularizerFamily& fam, int k) {
  auto mult = detail::scale_sum_multiplier(
      f.spec, mu, eps, [&](double rho) { return fam.piece_hat(k, rho); });
  return detail::apply_multiplier(f, mult);
}

// Low-pass piece using the tilde symbol.
inline GridFunction tilde_operator(const GridFunction& f, const DiscreteMeasure& mu,
                                   const EpsilonSigns& eps,
                                   const RegularizerFamily& fam) {
  auto mult = detail::scale_sum_multiplier(
      f.spec, mu, eps, [&](double rho) { return fam.tilde_hat(rho); });
  return detail::apply_multiplier(f, mult);
}

// Residual piece beyond k_min, so the family telescopes to the full sum.
inline GridFunction remainder_operator(const GridFunction& f, const DiscreteMeasure& mu,
                                       const EpsilonSigns& eps,
                                       const RegularizerFamily& fam) {
  auto mult = detail::scale_sum_multiplier(
      f.spec, mu, eps, [&](double rho) { return fam.remainder_hat(rho); });
  return detail::apply_multiplier(f, mult);
}

// L2 -> L2 norm of the multiplier operator by power iteration on T T^adj:
// seed = unit impulse minus its mean (orthogonal to constants, overlaps every
// other frequency), Rayleigh quotient convergence to 1e-3 relative.
inline double power_iteration_norm(const GridSpec& g, const std::vector<cplx>& mult,
                                   int max_steps = 500, double rel_tol = 1e-3) {
  int64_t M = g.cells();
  std::vector<double> mag2(static_cast<size_t>(M));
  for (int64_t i = 0; i < M; ++i) mag2[size_t(i)] = std::norm(mult[size_t(i)]);
  std::vector<double> v(size_t(M), -1.0 / double(M));
  v[0] += 1.0;
  auto apply = [&](const std::vector<double>& in, std::vector<double>& out) {
    std::vector<cplx> F(in.begin(), in.end());
    dft_grid(F, g, false);
    for (int64_t i = 0; i < M; ++i) F[size_t(i)] *= mag2[size_t(i)];
    dft_grid(F, g, true);
    for (int64_t i = 0; i < M; ++i) out[size_t(i)] = F[size_t(i)].real();
  };
  auto dot = [&](const std::vector<double>& a, const std::vector<double>& b) {
    Accum s;
    for (int64_t i = 0; i < M; ++i) s.add(a[size_t(i)] * b[size_t(i)]);
    return s.value();
  };
  std::vector<double> av(static_cast<size_t>(M));
  double lam_prev = -1.0;
  for (int step = 0; step < max_steps; ++step) {
    apply(v, av);
    double vv = dot(v, v);
    double lam = dot(av, v) / vv;
    double an = std::sqrt(dot(av, av));
    if (!(an > 0.0)) return 0.0;  // operator annihilates the seed cone
    for (int64_t i = 0; i < M; ++i) v[size_t(i)] = av[size_t(i)] / an;
    if (lam_prev >= 0.0 && std::fabs(lam - lam_prev) <= rel_tol * std::max(lam, 1e-300))
      return std::sqrt(std::max(0.0, lam));
    lam_prev = lam;
  }
  throw guard_error("power_iteration_norm: no convergence in step budget");
}

struct CurvePoint {
  double k = 0;
  double value = 0;
};

struct LineFit {
  double slope = 0;
  double intercept = 0;
  double rms = 0;
  std::vector<double> residuals;
};

inline LineFit fit_line(const std::vector<double>& xs, const std::vector<double>& ys) {
  if (xs.size() != ys.size() || xs.size() < 2)
    throw guard_error("fit_line: need two or more points");
  double n = double(xs.size()), sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (size_t i = 0; i < xs.size(); ++i) {
    sx += xs[i];
    sy += ys[i];
    sxx += xs[i] * xs[i];
    sxy += xs[i] * ys[i];
  }
  LineFit f;
  f.slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
  f.intercept = (sy - f.slope * sx) / n;
  double ss = 0;
  for (size_t i = 0; i < xs.size(); ++i) {
    double r = ys[i] - (f.slope * xs[i] + f.intercept);
    f.residuals.push_back(r);
    ss += r * r;
  }
  f.rms = std::sqrt(ss / n);
  return f;
}

// Table of per-annulus L2 operator norms for k in [k_lo, k_hi].
inline std::vector<CurvePoint> l2_decay_curve(const GridSpec& g,
                                              const DiscreteMeasure& mu,
                                              const EpsilonSigns& eps,
                                              const RegularizerFamily& fam, int k_lo,
                                              int k_hi) {
  std::vector<CurvePoint> out;
  for (int k = k_lo; k <= k_hi; ++k) {
    auto mult = detail::scale_sum_multiplier(
        g, mu, eps, [&](double rho) { return fam.piece_hat(k, rho); });
    out.push_back({double(k), power_iteration_norm(g, mult)});
  }
  return out;
}

inline std::vector<double> dyadic_lambdas(int t_lo, int t_hi, int per_octave = 1) {
  std::vector<double> out;
  for (int t = t_lo * per_octave; t <= t_hi * per_octave; ++t)
    out.push_back(std::exp2(double(t) / per_octave));
  return out;
}

// lambda |{|Tf| > lambda}| / ||f||_1 maximized over the lambda grid;
// level-set measure is physical (cell count x cell volume).
inline double weak_quasinorm(const GridFunction& Tf, double f_l1,
                             const std::vector<double>& lambdas) {
  if (!(f_l1 > 0.0)) return 0.0;
  double best = 0.0;
  for (double lam : lambdas) {
    int64_t cnt = 0;
    for (double v : Tf.v)
      if (std::fabs(v) > lam) ++cnt;
    best = std::max(best, lam * double(cnt) * Tf.spec.cell_volume() / f_l1);
  }
  return best;
}

// Deterministic L1-normalized battery: single cells and mean-zero dipole
// stacks mimicking Calderon-Zygmund bad parts at dyadic separations.
inline std::vector<GridFunction> l1_test_battery(const GridSpec& g) {
  std::vector<GridFunction> fs;
  {
    GridFunction f(g);
    f.v[0] = 1.0 / g.cell_volume();  // unit mass point
    fs.push_back(std::move(f));
  }
  for (int64_t w : {int64_t(1), int64_t(4), int64_t(16)}) {
    if (2 * w >= g.N) break;
    GridFunction f(g);
    double a = 0.5 / g.cell_volume();  // total |mass| 1
    f.v[0] = a;
    f.v[size_t(g.n == 1 ? g.wrap(w) : g.wrap(w))] -= a;
    fs.push_back(std::move(f));
  }
  {  // stack of dipoles spread across the torus
    GridFunction f(g);
    int copies = 8;
    double a = 0.5 / (g.cell_volume() * copies);
    for (int c = 0; c < copies; ++c) {
      int64_t base = (g.N / copies) * c;
      int64_t x0 = g.wrap(base), x1 = g.wrap(base + 1 + c % 3);
      if (g.n == 1) {
        f.v[size_t(x0)] += a;
        f.v[size_t(x1)] -= a;
      } else {
        int64_t y = g.wrap(base / 2);
        f.v[size_t(y * g.N + x0)] += a;
        f.v[size_t(y * g.N + x1)] -= a;
      }
    }
    fs.push_back(std::move(f));
  }
  return fs;
}

// Per-k sup over the battery and lambda grid of the weak-(1,1) ratio.
inline std::vector<CurvePoint> weak_l1_growth_curve(
    const GridSpec& g, const DiscreteMeasure& mu, const EpsilonSigns& eps,
    const RegularizerFamily& fam, int k_lo, int k_hi,
    const std::vector<GridFunction>& battery, const std::vector<double>& lambdas) {
  std::vector<CurvePoint> out;
  for (int k = k_lo; k <= k_hi; ++k) {
    auto mult = detail::scale_sum_multiplier(
        g, mu, eps, [&](double rho) { return fam.piece_hat(k, rho); });
    double best = 0.0;
    for (const auto& f : battery) {
      double l1 = norm_p(f, 1.0);
      best = std::max(best,
                      weak_quasinorm(detail::apply_multiplier(f, mult), l1, lambdas));
    }
    out.push_back({double(k), best});
  }
  return out;
}

// |{|Tf| > lambda}| against the L(logL)^r modular of f/lambda, per lambda.
inline std::vector<std::pair<double, double>> weak_llogl_ratios(
    const GridFunction& Tf, const GridFunction& f, const std::vector<double>& lambdas,
    double r) {
  if (!(r > 4.0)) throw guard_error("weak_llogl_ratios: need r > 4");
  std::vector<std::pair<double, double>> out;
  for (double lam : lambdas) {
    int64_t cnt = 0;
    for (double v : Tf.v)
      if (std::fabs(v) > lam) ++cnt;
    Accum denom;
    for (double v : f.v) {
      double a = std::fabs(v) / lam;
      if (a > 0.0) denom.add(a * std::pow(std::log(M_E + a), r));
    }
    double den = denom.value() * f.spec.cell_volume();
    double num = double(cnt) * Tf.spec.cell_volume();
    out.push_back({lam, den > 0.0 ? num / den : 0.0});
  }
  return out;
}

}  // namespace radonlab

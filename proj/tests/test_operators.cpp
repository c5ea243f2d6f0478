#include <catch2/catch_amalgamated.hpp>

#include "radonlab/operators.hpp"

using namespace radonlab;

namespace {

// 2D test measure with support radius exactly 8 cells (1 unit at u=8): the
// largest dilate-admissible radius on the smallest grids.
DiscreteMeasure ring8(const GridSpec& g) {
  DiscreteMeasure m;
  m.n = 2;
  m.u = g.u;
  m.atoms = {{{8, 0}, 0.125},  {{-8, 0}, 0.125}, {{0, 8}, 0.125},
             {{0, -8}, 0.125}, {{4, 4}, 0.125},  {{-4, 4}, 0.125},
             {{4, -4}, 0.125}, {{-4, -4}, 0.125}};
  return m;
}

DiscreteMeasure seg8(const GridSpec& g) {  // 1D counterpart
  DiscreteMeasure m;
  m.n = 1;
  m.u = g.u;
  m.atoms = {{{8, 0}, 0.25}, {{-8, 0}, 0.25}, {{3, 0}, 0.25}, {{-5, 0}, 0.25}};
  return m;
}

GridFunction random_fn(const GridSpec& g, Rng& rng) {
  GridFunction f(g);
  for (auto& x : f.v) x = rng.uniform(-1, 1);
  return f;
}

// direct shift-sum of one dilate
GridFunction direct_convolve(const GridFunction& f, const DiscreteMeasure& m) {
  const GridSpec& g = f.spec;
  GridFunction out(g);
  for (int64_t flat = 0; flat < g.cells(); ++flat) {
    auto c = g.coords(flat);
    double s = 0.0;
    for (const auto& a : m.atoms)
      s += a.w * (g.n == 1 ? f.at(c[0] - a.c[0]) : f.at(c[0] - a.c[0], c[1] - a.c[1]));
    out.v[size_t(flat)] = s;
  }
  return out;
}

double max_abs_diff(const GridFunction& a, const GridFunction& b) {
  double worst = 0.0;
  for (size_t i = 0; i < a.v.size(); ++i)
    worst = std::max(worst, std::fabs(a.v[i] - b.v[i]));
  return worst;
}

}  // namespace

TEST_CASE("exponent pairs and interpolation") {
  ExponentPair e(1.5, 3.0);
  CHECK(e.p_prime() == Catch::Approx(3.0));
  CHECK(e.q_prime() == Catch::Approx(1.5));
  CHECK_THROWS_AS(ExponentPair(1.0, 2.0), guard_error);
  CHECK_THROWS_AS(ExponentPair(3.0, 2.0), guard_error);

  ExponentPair t1 = theta_exponents(1.5, 3.0, 1.0);
  CHECK(t1.p == Catch::Approx(2.0));
  CHECK(t1.q == Catch::Approx(2.0));
  ExponentPair t0 = theta_exponents(1.5, 3.0, 0.0);
  CHECK(t0.p == Catch::Approx(1.5));
  CHECK(t0.q == Catch::Approx(3.0));
  ExponentPair th = theta_exponents(1.5, 3.0, 0.5);
  CHECK(th.p == Catch::Approx(12.0 / 7.0));
  CHECK(th.q == Catch::Approx(12.0 / 5.0));
  CHECK_THROWS_AS(theta_exponents(1.5, 3.0, 1.5), guard_error);
}

TEST_CASE("epsilon signs") {
  EpsilonSigns a = EpsilonSigns::alternating(-2, 1);
  CHECK(a.value(-2) == 1.0);
  CHECK(a.value(-1) == -1.0);
  CHECK(a.value(0) == 1.0);
  CHECK(a.value(1) == -1.0);
  CHECK(a.value(2) == 0.0);
  CHECK(a.value(-3) == 0.0);
  CHECK_THROWS_AS(EpsilonSigns(1, 0, {}), guard_error);
  CHECK_THROWS_AS(EpsilonSigns(0, 0, {1.5}), guard_error);
  EpsilonSigns r = EpsilonSigns::random_signs(-3, 3, 99);
  for (double v : r.values) CHECK(std::fabs(v) == 1.0);
}

TEST_CASE("local ball averages") {
  GridSpec g = make_grid(2, 5, 3);
  GridFunction c(g, 3.25);
  for (double r : {0.2, 0.7, 1.9})
    for (double p : {1.0, 1.5, 2.0})
      CHECK(local_average(c, {5, 9}, r, p) == Catch::Approx(3.25).epsilon(1e-13));

  // indicator of the strict ball averages to one over that ball
  double r = 1.1;
  double rc = r * g.u;
  GridFunction ind(g);
  for (int64_t dy = -16; dy < 16; ++dy)
    for (int64_t dx = -16; dx < 16; ++dx)
      if (double(dx) * dx + double(dy) * dy < rc * rc) ind.at(7 + dx, 7 + dy) = 1.0;
  CHECK(local_average(ind, {7, 7}, r, 1.0) == Catch::Approx(1.0).epsilon(1e-13));

  CHECK_THROWS_AS(local_average(c, {0, 0}, 100.0, 1.0), guard_error);
  CHECK_THROWS_AS(local_average(c, {0, 0}, -1.0, 1.0), guard_error);
}

TEST_CASE("maximal function vs direct oracle") {
  GridSpec g = make_grid(2, 5, 3);
  Rng rng(21);
  for (int rep = 0; rep < 3; ++rep) {
    GridFunction f = random_fn(g, rng);
    for (double p : {1.0, 2.0}) {
      GridFunction M = maximal_fn(f, p);
      for (int64_t flat = 0; flat < g.cells(); flat += 7) {
        auto c = g.coords(flat);
        double want = 0.0;
        for (int i = 0; i <= g.K - 2; ++i)
          want = std::max(
              want, local_average(f, c, double(int64_t(1) << i) / g.u, p));
        CHECK(std::fabs(M.v[size_t(flat)] - want) <= 1e-10);
      }
    }
  }

  GridFunction c2(g, 1.5);
  GridFunction Mc = maximal_fn(c2, 1.0);
  for (double v : Mc.v) CHECK(v == Catch::Approx(1.5).epsilon(1e-12));

  // single cell: the smallest ball sees the full value
  GridFunction cell(g);
  cell.at(4, 4) = 2.0;
  GridFunction M1 = maximal_fn(cell, 1.0);
  CHECK(M1.at(4, 4) == Catch::Approx(2.0).epsilon(1e-12));
  CHECK(M1.at(20, 20) < 0.1);  // far away only large balls contribute
}

TEST_CASE("maximal function L2 smoke bound") {
  GridSpec g = make_grid(2, 8, 4);
  Rng rng(77);
  double worst = 0.0;
  for (int rep = 0; rep < 50; ++rep) {
    GridFunction f = random_fn(g, rng);
    worst = std::max(worst, norm_p(maximal_fn(f, 2.0), 2.0) / norm_p(f, 2.0));
  }
  CHECK(worst <= 10.0);
  CHECK(worst >= 1.0 - 1e-12);  // maximal function dominates |f|
}

TEST_CASE("radon transform basics") {
  GridSpec g = make_grid(2, 7, 3);
  DiscreteMeasure mu = modulate_mean_zero(ring8(g), coordinate_density);
  Rng rng(3);
  GridFunction f = random_fn(g, rng);

  GridFunction z = radon_T(f, mu, EpsilonSigns::zeros(0, 1));
  for (double v : z.v) CHECK(v == 0.0);

  GridFunction c(g, 4.0);
  GridFunction Tc = radon_T(c, mu, EpsilonSigns::alternating(0, 1));
  CHECK(sup_norm(Tc) <= 1e-10);

  // single scale agrees with plain convolution by the dilate
  EpsilonSigns one(1, 1, {1.0});
  GridFunction a = radon_T(f, mu, one);
  GridFunction b = convolve(f, dilate(mu, 1, g));
  CHECK(max_abs_diff(a, b) <= 1e-12);

  DiscreteMeasure not_mz = ring8(g);
  CHECK_THROWS_AS(radon_T(f, not_mz, one), guard_error);
}

TEST_CASE("radon transform vs direct oracle, multi-scale") {
  GridSpec g = make_grid(2, 7, 3);  // N=128: scales {0,1} admissible at radius 8
  DiscreteMeasure mu = modulate_mean_zero(ring8(g), coordinate_density);
  EpsilonSigns eps = EpsilonSigns::alternating(0, 1);
  Rng rng(31);
  for (int rep = 0; rep < 5; ++rep) {
    GridFunction f = random_fn(g, rng);
    GridFunction got = radon_T(f, mu, eps);
    GridFunction want(g);
    for (int j = 0; j <= 1; ++j) {
      GridFunction part = direct_convolve(f, dilate(mu, j, g));
      for (size_t i = 0; i < want.v.size(); ++i)
        want.v[i] += eps.value(j) * part.v[i];
    }
    CHECK(max_abs_diff(got, want) <= 1e-10);
  }
}

TEST_CASE("maximal radon transform") {
  GridSpec g = make_grid(2, 7, 3);
  DiscreteMeasure sigma = ring8(g);
  Rng rng(13);

  GridFunction one(g, 1.0);
  GridFunction T1 = maximal_T_star(one, sigma, 0, 1);
  for (double v : T1.v) CHECK(v == Catch::Approx(1.0).epsilon(1e-12));

  for (int rep = 0; rep < 5; ++rep) {
    GridFunction f = random_fn(g, rng);
    GridFunction got = maximal_T_star(f, sigma, 0, 1);
    GridFunction absf(g);
    for (size_t i = 0; i < f.v.size(); ++i) absf.v[i] = std::fabs(f.v[i]);
    GridFunction want(g, -1e300);
    for (int j = 0; j <= 1; ++j) {
      GridFunction part = direct_convolve(absf, dilate(sigma, j, g));
      for (size_t i = 0; i < want.v.size(); ++i)
        want.v[i] = std::max(want.v[i], part.v[i]);
    }
    CHECK(max_abs_diff(got, want) <= 1e-10);
  }

  DiscreteMeasure neg = sigma;
  neg.atoms[0].w = -0.125;
  GridFunction f = random_fn(g, rng);
  CHECK_THROWS_AS(maximal_T_star(f, neg, 0, 1), guard_error);
  CHECK_THROWS_AS(maximal_T_star(f, sigma, 1, 0), guard_error);
}

TEST_CASE("truncated and high-scale operators") {
  GridSpec g = make_grid(2, 7, 3);
  DiscreteMeasure mu = modulate_mean_zero(ring8(g), coordinate_density);
  DiscreteMeasure sigma = ring8(g);
  EpsilonSigns eps = EpsilonSigns::alternating(0, 1);
  Rng rng(17);
  GridFunction f = random_fn(g, rng);

  // whole-domain cube at a level covering the scale range: no truncation
  DyadicCube whole{g.K - g.s, {0, 0}};
  GridFunction a = truncated_T_Q(f, whole, mu, eps);
  GridFunction b = radon_T(f, mu, eps);
  CHECK(max_abs_diff(a, b) <= 1e-12);

  // level below N1: null operator
  DyadicCube tiny{-1, {0, 0}};
  GridFunction z = truncated_T_Q(f, tiny, mu, eps);
  for (double v : z.v) CHECK(v == 0.0);

  // mid-size cube vs direct oracle: restrict then sum admissible scales
  DyadicCube mid{0, {16, 16}};
  GridFunction got = truncated_T_Q(f, mid, mu, eps);
  GridFunction cut(g);
  for (int64_t c : cells_of_cube(g, mid)) cut.v[size_t(c)] = f.v[size_t(c)];
  GridFunction want(g);
  {
    GridFunction part = direct_convolve(cut, dilate(mu, 0, g));
    for (size_t i = 0; i < want.v.size(); ++i)
      want.v[i] += eps.value(0) * part.v[i];
  }
  CHECK(max_abs_diff(got, want) <= 1e-10);

  GridFunction h1 = high_T_star(f, sigma, 0, 1, whole);
  GridFunction h2 = maximal_T_star(f, sigma, 0, 1);
  CHECK(max_abs_diff(h1, h2) == 0.0);

  GridFunction h0 = high_T_star(f, sigma, 0, 1, mid);
  GridFunction m0 = maximal_T_star(f, sigma, 0, 0);
  CHECK(max_abs_diff(h0, m0) == 0.0);

  GridFunction hz = high_T_star(f, sigma, 0, 1, tiny);
  for (double v : hz.v) CHECK(v == 0.0);
}

TEST_CASE("improving norm probe") {
  GridSpec g = make_grid(2, 7, 3);
  DiscreteMeasure id;
  id.n = 2;
  id.u = g.u;
  id.atoms = {{{0, 0}, 1.0}};
  double e = improving_norm_estimate(g, id, 2.0, 2.0, 12, 5);
  CHECK(e >= 0.99);
  CHECK(e <= 1.0 + 1e-12);

  // probability measure with a one-volume plateau: nonincreasing in q
  GridSpec gq = make_grid(2, 8, 4);
  DiscreteMeasure circ = circle_measure(gq, 1.0, 16 * gq.u);
  double q2 = improving_norm_estimate(gq, circ, 1.5, 2.0, 12, 5, TrialFamily::unit_boxes);
  double q3 = improving_norm_estimate(gq, circ, 1.5, 3.0, 12, 5, TrialFamily::unit_boxes);
  CHECK(q3 <= q2 + 1e-12);

  CHECK_THROWS_AS(improving_norm_estimate(g, id, 2.0, 2.0, 5, 1), guard_error);
  CHECK_THROWS_AS(improving_norm_estimate(g, id, 0.5, 2.0, 12, 1), guard_error);
}

TEST_CASE("improving estimate stable under grid refinement") {
  DiscreteMeasure m9, m10;
  double e9, e10;
  {
    GridSpec g = make_grid(2, 9, 5);
    e9 = improving_norm_estimate(g, circle_measure(g), 1.5, 3.0, 12, 5);
  }
  {
    GridSpec g = make_grid(2, 10, 5);
    e10 = improving_norm_estimate(g, circle_measure(g), 1.5, 3.0, 12, 5);
  }
  CHECK(e9 > 0.0);
  CHECK(std::fabs(e10 - e9) <= 0.15 * std::max(e9, e10));
}

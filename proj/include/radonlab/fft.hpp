#pragma once
// Iterative radix-2 FFT.  Grid sizes are always powers of two so no
// general-length machinery is needed.  2D transforms go row-column with an
// explicit transpose; rows are distributed over a small thread pool.  Results
// are bitwise independent of the thread count (rows are independent and the
// per-row arithmetic is fixed).

#include <atomic>
#include <complex>
#include <thread>
#include <vector>

#include "grid.hpp"

namespace radonlab {

using cplx = std::complex<double>;

// Worker count used for row-parallel transforms (and a few other
// embarrassingly parallel loops).  Settable from the CLI.
inline int& worker_threads() {
  static int t = []() {
    unsigned hw = std::thread::hardware_concurrency();
    return int(hw == 0 ? 1 : (hw > 8 ? 8 : hw));
  }();
  return t;
}

namespace detail {

inline void fft_inplace(cplx* a, int N, const std::vector<cplx>& tw) {
  // bit reversal
  for (int i = 1, j = 0; i < N; ++i) {
    int bit = N >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i], a[j]);
  }
  for (int len = 2; len <= N; len <<= 1) {
    int step = N / len;
    for (int i = 0; i < N; i += len) {
      for (int k = 0; k < len / 2; ++k) {
        cplx w = tw[size_t(k) * step];
        cplx even = a[i + k];
        cplx odd = a[i + k + len / 2] * w;
        a[i + k] = even + odd;
        a[i + k + len / 2] = even - odd;
      }
    }
  }
}

inline std::vector<cplx> twiddles(int N, bool inverse) {
  std::vector<cplx> tw(size_t(N / 2));
  double sgn = inverse ? 2.0 : -2.0;
  for (int k = 0; k < N / 2; ++k)
    tw[size_t(k)] = std::polar(1.0, sgn * M_PI * k / N);
  return tw;
}

template <class F>
inline void parallel_rows(int rows, F&& body) {
  int nt = worker_threads();
  if (nt <= 1 || rows < 2 * nt) {
    for (int r = 0; r < rows; ++r) body(r);
    return;
  }
  std::atomic<int> next{0};
  std::vector<std::thread> pool;
  pool.reserve(size_t(nt));
  for (int t = 0; t < nt; ++t)
    pool.emplace_back([&]() {
      for (;;) {
        int r = next.fetch_add(1);
        if (r >= rows) return;
        body(r);
      }
    });
  for (auto& th : pool) th.join();
}

inline void transpose(std::vector<cplx>& a, int N) {
  for (int y = 0; y < N; ++y)
    for (int x = y + 1; x < N; ++x)
      std::swap(a[size_t(y) * N + x], a[size_t(x) * N + y]);
}

}  // namespace detail

// Unnormalized forward DFT / 1/M-normalized inverse over the grid layout
// (2D layout: index = y*N + x).
inline void dft_grid(std::vector<cplx>& a, const GridSpec& g, bool inverse) {
  int N = g.N;
  auto tw = detail::twiddles(N, inverse);
  if (g.n == 1) {
    detail::fft_inplace(a.data(), N, tw);
  } else {
    detail::parallel_rows(
        N, [&](int r) { detail::fft_inplace(a.data() + size_t(r) * N, N, tw); });
    detail::transpose(a, N);
    detail::parallel_rows(
        N, [&](int r) { detail::fft_inplace(a.data() + size_t(r) * N, N, tw); });
    detail::transpose(a, N);
  }
  if (inverse) {
    double inv = 1.0 / double(g.cells());
    for (auto& z : a) z *= inv;
  }
}

// Spectral samples of a grid function: coefficients are cell-volume-scaled
// DFT values, i.e. Riemann sums of the continuum Fourier integral at the
// frequencies xi = k*u/N per axis, k in (-N/2, N/2].  Stored in DFT order;
// signed_freq maps an array position to its signed integer index k.
struct SpectralFunction {
  GridSpec spec;
  std::vector<cplx> c;

  int signed_freq(int pos) const { return pos <= spec.N / 2 ? pos : pos - spec.N; }
  // physical frequency vector of a flat position
  std::array<double, 2> xi(int64_t flat) const {
    double scale = double(spec.u) / spec.N;
    if (spec.n == 1) return {signed_freq(int(flat)) * scale, 0.0};
    return {signed_freq(int(flat % spec.N)) * scale,
            signed_freq(int(flat / spec.N)) * scale};
  }
};

inline SpectralFunction spectrum(const GridFunction& f) {
  SpectralFunction S;
  S.spec = f.spec;
  S.c.assign(f.v.begin(), f.v.end());
  dft_grid(S.c, f.spec, false);
  double cv = f.spec.cell_volume();
  for (auto& z : S.c) z *= cv;
  return S;
}

inline GridFunction inverse_spectrum(const SpectralFunction& S) {
  std::vector<cplx> a = S.c;
  dft_grid(a, S.spec, true);
  GridFunction f(S.spec);
  double icv = 1.0 / S.spec.cell_volume();
  for (size_t i = 0; i < a.size(); ++i) f.v[i] = a[i].real() * icv;
  return f;
}

}  // namespace radonlab

#pragma once

#include <algorithm>
#include <complex>
#include <cstddef>
#include <cstdint>
#include <map>
#include <numbers>
#include <utility>
#include <vector>

#include "hsideconv/cube.hpp"
#include "hsideconv/errors.hpp"

namespace hsideconv {

// Complex-valued cube with the same (band, row, col) indexing as HsiCube.
// Produced by the per-band 2D transform or by the full 3D transform; forward
// transforms are unnormalized, inverse transforms carry the 1/n factor, so a
// forward/inverse round trip reproduces the source to ~1e-14.
struct FreqCube {
  int bands = 0, rows = 0, cols = 0;
  std::vector<std::complex<double>> data;

  FreqCube() = default;
  FreqCube(int b, int r, int c)
      : bands(b), rows(r), cols(c),
        data(static_cast<std::size_t>(b) * r * c) {
    if (b < 1 || r < 1 || c < 1) {
      throw dimension_error("frequency cube dimensions must all be >= 1");
    }
  }

  std::size_t index(int b, int i, int j) const {
    return (static_cast<std::size_t>(b) * rows + i) * cols + j;
  }
  std::complex<double>& operator()(int b, int i, int j) { return data[index(b, i, j)]; }
  const std::complex<double>& operator()(int b, int i, int j) const { return data[index(b, i, j)]; }
};

namespace fft {

using cd = std::complex<double>;

namespace detail {

inline bool is_pow2(std::size_t n) { return n != 0 && (n & (n - 1)) == 0; }

inline std::size_t next_pow2(std::size_t n) {
  std::size_t m = 1;
  while (m < n) m <<= 1;
  return m;
}

// Forward twiddle table exp(-2*pi*i*k/n), k in [0, n/2). Cached per length;
// thread_local so concurrent transforms never share mutable state.
inline const std::vector<cd>& twiddles(std::size_t n) {
  thread_local std::map<std::size_t, std::vector<cd>> cache;
  auto& t = cache[n];
  if (t.empty()) {
    t.resize(n / 2);
    const double step = -2.0 * std::numbers::pi / static_cast<double>(n);
    for (std::size_t k = 0; k < n / 2; ++k) {
      t[k] = std::polar(1.0, step * static_cast<double>(k));
    }
  }
  return t;
}

// In-place unnormalized forward DFT, n a power of two (iterative Cooley-Tukey).
inline void forward_pow2(std::vector<cd>& a) {
  const std::size_t n = a.size();
  if (n <= 1) return;
  for (std::size_t i = 1, j = 0; i < n; ++i) {
    std::size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i], a[j]);
  }
  const auto& tw = twiddles(n);
  for (std::size_t len = 2; len <= n; len <<= 1) {
    const std::size_t half = len >> 1;
    const std::size_t step = n / len;
    for (std::size_t i = 0; i < n; i += len) {
      for (std::size_t k = 0; k < half; ++k) {
        const cd w = tw[k * step];
        const cd u = a[i + k];
        const cd v = a[i + k + half] * w;
        a[i + k] = u + v;
        a[i + k + half] = u - v;
      }
    }
  }
}

inline void inverse_pow2(std::vector<cd>& a) {
  for (cd& v : a) v = std::conj(v);
  forward_pow2(a);
  const double inv = 1.0 / static_cast<double>(a.size());
  for (cd& v : a) v = std::conj(v) * inv;
}

// Chirp factor exp(-i*pi*k^2/n) with k^2 reduced mod 2n to keep the angle small.
inline cd chirp(std::size_t k, std::size_t n) {
  const std::uint64_t k2 = (static_cast<std::uint64_t>(k) * k) % (2 * n);
  return std::polar(1.0, -std::numbers::pi * static_cast<double>(k2) / static_cast<double>(n));
}

// Bluestein chirp-z: unnormalized forward DFT of arbitrary length via a
// power-of-two circular convolution.
inline void forward_bluestein(std::vector<cd>& a) {
  const std::size_t n = a.size();
  const std::size_t m = next_pow2(2 * n + 1);
  std::vector<cd> va(m, cd{0.0, 0.0});
  std::vector<cd> vb(m, cd{0.0, 0.0});
  for (std::size_t k = 0; k < n; ++k) {
    const cd c = chirp(k, n);
    va[k] = a[k] * c;
    vb[k] = std::conj(c);
  }
  for (std::size_t k = 1; k < n; ++k) vb[m - k] = vb[k];
  forward_pow2(va);
  forward_pow2(vb);
  for (std::size_t i = 0; i < m; ++i) va[i] *= vb[i];
  inverse_pow2(va);
  for (std::size_t k = 0; k < n; ++k) a[k] = va[k] * chirp(k, n);
}

inline void forward_any(std::vector<cd>& a) {
  if (a.size() <= 1) return;
  if (is_pow2(a.size())) {
    forward_pow2(a);
  } else {
    forward_bluestein(a);
  }
}

}  // namespace detail

// In-place 1D DFT of arbitrary length. Forward is unnormalized; inverse
// applies the 1/n factor.
inline void transform(std::vector<cd>& a, bool inverse) {
  if (a.size() <= 1) return;
  if (!inverse) {
    detail::forward_any(a);
    return;
  }
  for (cd& v : a) v = std::conj(v);
  detail::forward_any(a);
  const double inv = 1.0 / static_cast<double>(a.size());
  for (cd& v : a) v = std::conj(v) * inv;
}

namespace detail {

// Transform every line along one axis of a (bands, rows, cols) complex cube.
// axis: 0 = bands, 1 = rows, 2 = cols.
inline void transform_axis(std::vector<cd>& data, int bands, int rows, int cols,
                           int axis, bool inverse) {
  const std::size_t nb = static_cast<std::size_t>(bands);
  const std::size_t nr = static_cast<std::size_t>(rows);
  const std::size_t nc = static_cast<std::size_t>(cols);
  std::size_t len, stride, outer, inner;
  if (axis == 0) {
    len = nb; stride = nr * nc; outer = 1; inner = nr * nc;
  } else if (axis == 1) {
    len = nr; stride = nc; outer = nb; inner = nc;
  } else {
    len = nc; stride = 1; outer = nb * nr; inner = 1;
  }
  if (len == 1) return;
  std::vector<cd> line(len);
  for (std::size_t o = 0; o < outer; ++o) {
    for (std::size_t i = 0; i < inner; ++i) {
      const std::size_t base = o * len * stride + i;
      cd* p = data.data() + base;
      for (std::size_t k = 0; k < len; ++k) line[k] = p[k * stride];
      transform(line, inverse);
      for (std::size_t k = 0; k < len; ++k) p[k * stride] = line[k];
    }
  }
}

}  // namespace detail

// 2D DFT of a single rows x cols plane held in a contiguous complex buffer.
inline void transform_plane(std::vector<cd>& plane, int rows, int cols, bool inverse) {
  if (plane.size() != static_cast<std::size_t>(rows) * cols) {
    throw dimension_error("plane buffer does not match rows*cols");
  }
  detail::transform_axis(plane, 1, rows, cols, 2, inverse);
  detail::transform_axis(plane, 1, rows, cols, 1, inverse);
}

}  // namespace fft

// Per-band 2D DFT of every spectral plane.
inline FreqCube fft2_per_band(const HsiCube& cube) {
  FreqCube out(cube.bands(), cube.rows(), cube.cols());
  for (std::size_t i = 0; i < cube.size(); ++i) out.data[i] = cube.data()[i];
  for (int b = 0; b < cube.bands(); ++b) {
    std::vector<fft::cd> plane(out.data.begin() + out.index(b, 0, 0),
                               out.data.begin() + out.index(b, 0, 0) + static_cast<std::size_t>(cube.rows()) * cube.cols());
    fft::transform_plane(plane, cube.rows(), cube.cols(), false);
    std::copy(plane.begin(), plane.end(), out.data.begin() + out.index(b, 0, 0));
  }
  return out;
}

// Inverse of fft2_per_band; returns the real part.
inline HsiCube ifft2_per_band_real(const FreqCube& f) {
  HsiCube out(f.bands, f.rows, f.cols);
  for (int b = 0; b < f.bands; ++b) {
    std::vector<fft::cd> plane(f.data.begin() + f.index(b, 0, 0),
                               f.data.begin() + f.index(b, 0, 0) + static_cast<std::size_t>(f.rows) * f.cols);
    fft::transform_plane(plane, f.rows, f.cols, true);
    for (std::size_t i = 0; i < plane.size(); ++i) {
      out.data()[out.index(b, 0, 0) + i] = plane[i].real();
    }
  }
  return out;
}

// Full 3D DFT over (band, row, col).
inline FreqCube fft3(const HsiCube& cube) {
  FreqCube out(cube.bands(), cube.rows(), cube.cols());
  for (std::size_t i = 0; i < cube.size(); ++i) out.data[i] = cube.data()[i];
  fft::detail::transform_axis(out.data, out.bands, out.rows, out.cols, 2, false);
  fft::detail::transform_axis(out.data, out.bands, out.rows, out.cols, 1, false);
  fft::detail::transform_axis(out.data, out.bands, out.rows, out.cols, 0, false);
  return out;
}

// Inverse 3D DFT; returns the real part.
inline HsiCube ifft3_real(const FreqCube& f) {
  std::vector<fft::cd> tmp = f.data;
  fft::detail::transform_axis(tmp, f.bands, f.rows, f.cols, 2, true);
  fft::detail::transform_axis(tmp, f.bands, f.rows, f.cols, 1, true);
  fft::detail::transform_axis(tmp, f.bands, f.rows, f.cols, 0, true);
  HsiCube out(f.bands, f.rows, f.cols);
  for (std::size_t i = 0; i < tmp.size(); ++i) out.data()[i] = tmp[i].real();
  return out;
}

}  // namespace hsideconv

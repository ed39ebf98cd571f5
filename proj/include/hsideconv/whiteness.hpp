#pragma once

#include <algorithm>
#include <cstddef>

#include "hsideconv/cube.hpp"
#include "hsideconv/errors.hpp"
#include "hsideconv/fft.hpp"

namespace hsideconv {

// Diagnostics of one whiteness evaluation. `w` is the scalar measure
// ||A/A(0,0,0)||_F^2 of the normalized circular 3D autocorrelation A of the
// residual; it equals 1 exactly for a perfectly white (single-impulse)
// residual and grows toward L = bands*rows*cols for fully correlated ones.
struct WhitenessReport {
  double w = 0.0;
  double zero_lag = 0.0;   // A(0,0,0) = ||R||_F^2 / L
  std::size_t l = 0;       // total voxel count L
};

// Circular 3D autocorrelation (1/L)(R star R) over all N*P*Q lags, computed
// as the inverse 3D DFT of |DFT(R)|^2 / L.
inline HsiCube autocorr3d(const HsiCube& r) {
  const double l = static_cast<double>(r.size());
  FreqCube f = fft3(r);
  for (auto& v : f.data) v = std::norm(v) / l;
  return ifft3_real(f);
}

namespace detail {

// Whiteness from the power sums of the 3D spectrum: with s2 = sum |F|^2 and
// s4 = sum |F|^4, Parseval gives ||R star R||_F^2 = s4/L and ||R||_F^4 =
// (s2/L)^2, hence W = L * s4 / s2^2. Clamped to >= 1 (Cauchy-Schwarz lower
// bound) against rounding.
inline double whiteness_from_power_sums(double s2, double s4, std::size_t l) {
  if (s2 <= 0.0) {
    throw degenerate_residual_error("whiteness undefined for an all-zero residual");
  }
  return std::max(1.0, static_cast<double>(l) * s4 / (s2 * s2));
}

}  // namespace detail

// Scalar 3D residual whiteness W(R) = ||R star R||_F^2 / ||R||_F^4.
// Scale-invariant: W(cR) == W(R) for any c != 0.
inline WhitenessReport whiteness_measure(const HsiCube& r) {
  double energy = 0.0;
  for (double v : r.data()) energy += v * v;
  if (energy <= 0.0) {
    throw degenerate_residual_error("whiteness undefined for an all-zero residual");
  }
  FreqCube f = fft3(r);
  double s2 = 0.0, s4 = 0.0;
  for (const auto& v : f.data) {
    const double p = std::norm(v);
    s2 += p;
    s4 += p * p;
  }
  WhitenessReport rep;
  rep.l = r.size();
  rep.zero_lag = energy / static_cast<double>(r.size());
  rep.w = detail::whiteness_from_power_sums(s2, s4, r.size());
  return rep;
}

}  // namespace hsideconv

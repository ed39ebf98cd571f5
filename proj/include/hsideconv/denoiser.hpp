#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "hsideconv/cube.hpp"
#include "hsideconv/errors.hpp"
#include "hsideconv/fft.hpp"

namespace hsideconv {

// Pluggable blind prior: maps a noisy cube to a denoised cube of the same
// shape, with no noise-level argument.
using Denoiser = std::function<HsiCube(const HsiCube&)>;

inline Denoiser identity_denoiser() {
  return [](const HsiCube& z) { return z; };
}

// Classical fallback prior: 3D frequency-domain soft shrinkage. The threshold
// is strength times the median absolute spectral coefficient of the cube
// (median = element at index L/2 in ascending order), so it tracks the cube's
// own noise floor. strength 0 is the identity.
inline HsiCube baseline_denoise(const HsiCube& z, double strength) {
  if (strength < 0.0) throw spec_error("shrinkage strength must be nonnegative");
  if (strength == 0.0) return z;
  FreqCube f = fft3(z);
  std::vector<double> mags(f.data.size());
  for (std::size_t i = 0; i < f.data.size(); ++i) mags[i] = std::abs(f.data[i]);
  std::vector<double> sorted = mags;
  std::nth_element(sorted.begin(), sorted.begin() + sorted.size() / 2, sorted.end());
  const double threshold = strength * sorted[sorted.size() / 2];
  for (std::size_t i = 0; i < f.data.size(); ++i) {
    if (mags[i] <= threshold) {
      f.data[i] = {0.0, 0.0};
    } else {
      f.data[i] *= 1.0 - threshold / mags[i];
    }
  }
  return ifft3_real(f);
}

inline Denoiser make_baseline_denoiser(double strength) {
  if (strength < 0.0) throw spec_error("shrinkage strength must be nonnegative");
  return [strength](const HsiCube& z) { return baseline_denoise(z, strength); };
}

}  // namespace hsideconv

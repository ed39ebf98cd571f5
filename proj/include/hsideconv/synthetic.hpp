#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>

#include "hsideconv/cube.hpp"
#include "hsideconv/rng.hpp"

namespace hsideconv {

// Random band-limited cube: a superposition of low-frequency 3D cosines with
// random amplitudes and phases, rescaled to [0.05, 0.95]. Deterministic in
// `seed`; used as desk-scale stand-in for real hyperspectral scenes.
inline HsiCube make_smooth_cube(int bands, int rows, int cols, std::uint64_t seed,
                                int waves = 6, int max_freq = 3) {
  HsiCube cube(bands, rows, cols);
  Rng rng(seed);
  for (int w = 0; w < waves; ++w) {
    int fb = rng.uniform_int(max_freq + 1);
    int fi = rng.uniform_int(max_freq + 1);
    int fj = rng.uniform_int(max_freq + 1);
    if (fb == 0 && fi == 0 && fj == 0) fj = 1;
    const double amp = rng.uniform(0.3, 1.0);
    const double phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
    for (int b = 0; b < bands; ++b) {
      for (int i = 0; i < rows; ++i) {
        for (int j = 0; j < cols; ++j) {
          const double arg = 2.0 * std::numbers::pi *
                             (fb * static_cast<double>(b) / bands +
                              fi * static_cast<double>(i) / rows +
                              fj * static_cast<double>(j) / cols);
          cube(b, i, j) += amp * std::cos(arg + phase);
        }
      }
    }
  }
  const auto [mn, mx] = std::minmax_element(cube.data().begin(), cube.data().end());
  const double lo = *mn, hi = *mx;
  if (hi - lo < 1e-12) {
    std::fill(cube.data().begin(), cube.data().end(), 0.5);
    return cube;
  }
  for (double& v : cube.data()) v = 0.05 + 0.9 * (v - lo) / (hi - lo);
  return cube;
}

}  // namespace hsideconv

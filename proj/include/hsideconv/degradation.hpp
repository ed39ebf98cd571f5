#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <string>
#include <vector>

#include "hsideconv/cube.hpp"
#include "hsideconv/errors.hpp"
#include "hsideconv/kernel.hpp"
#include "hsideconv/rng.hpp"

namespace hsideconv {

enum class KernelKind { gaussian, circle, motion, square };

// Parametric description of a benchmark blur kernel. `size` is the odd
// spatial extent of the generated window; the remaining fields are read
// according to `kind`.
struct KernelSpec {
  KernelKind kind = KernelKind::gaussian;
  int size = 0;
  double bandwidth = 0.0;  // gaussian: isotropic std in pixels
  int diameter = 0;        // circle: disc diameter in pixels
  double angle_deg = 0.0;  // motion: segment angle, degrees, 0 = along columns
  double length = 0.0;     // motion: segment length in pixels
  int side = 0;            // square: box side in pixels
};

struct NoiseSpec {
  double sigma = 0.0;      // std deviation on the [0,1] intensity scale
  std::uint64_t seed = 0;
};

namespace detail {

inline std::vector<double> normalize_taps(std::vector<double> taps) {
  double sum = 0.0;
  for (double t : taps) sum += t;
  if (sum <= 0.0) throw spec_error("kernel has zero mass");
  for (double& t : taps) t /= sum;
  return taps;
}

// Distance from grid point (y, x) to the segment between (y0,x0) and (y1,x1).
inline double point_segment_distance(double y, double x, double y0, double x0,
                                     double y1, double x1) {
  const double dy = y1 - y0, dx = x1 - x0;
  const double len2 = dy * dy + dx * dx;
  double t = 0.0;
  if (len2 > 0.0) {
    t = ((y - y0) * dy + (x - x0) * dx) / len2;
    t = std::clamp(t, 0.0, 1.0);
  }
  const double py = y0 + t * dy, px = x0 + t * dx;
  return std::hypot(y - py, x - px);
}

}  // namespace detail

// Build one of the four parametric blur kernels. The result is non-negative
// and sums to 1 within 1e-12.
inline KernelStack make_kernel(const KernelSpec& spec) {
  const int k = spec.size;
  if (k < 1) throw spec_error("kernel size must be positive");
  if (k % 2 == 0) throw spec_error("kernel size must be odd");
  const int c = (k - 1) / 2;
  std::vector<double> taps(static_cast<std::size_t>(k) * k, 0.0);

  switch (spec.kind) {
    case KernelKind::gaussian: {
      if (!(spec.bandwidth > 0.0)) throw spec_error("gaussian bandwidth must be positive");
      const double inv2s2 = 1.0 / (2.0 * spec.bandwidth * spec.bandwidth);
      for (int r = 0; r < k; ++r) {
        for (int q = 0; q < k; ++q) {
          const double dy = r - c, dx = q - c;
          taps[static_cast<std::size_t>(r) * k + q] = std::exp(-(dy * dy + dx * dx) * inv2s2);
        }
      }
      break;
    }
    case KernelKind::circle: {
      if (spec.diameter < 1) throw spec_error("circle diameter must be positive");
      if (spec.diameter > k) throw spec_error("circle diameter exceeds kernel size");
      const double r2 = 0.25 * spec.diameter * spec.diameter;
      for (int r = 0; r < k; ++r) {
        for (int q = 0; q < k; ++q) {
          const double dy = r - c, dx = q - c;
          if (dy * dy + dx * dx <= r2) taps[static_cast<std::size_t>(r) * k + q] = 1.0;
        }
      }
      break;
    }
    case KernelKind::square: {
      if (spec.side < 1) throw spec_error("square side must be positive");
      if (spec.side % 2 == 0) throw spec_error("square side must be odd to stay centered");
      if (spec.side > k) throw spec_error("square side exceeds kernel size");
      const int h = (spec.side - 1) / 2;
      for (int r = c - h; r <= c + h; ++r) {
        for (int q = c - h; q <= c + h; ++q) {
          taps[static_cast<std::size_t>(r) * k + q] = 1.0;
        }
      }
      break;
    }
    case KernelKind::motion: {
      if (!(spec.length > 0.0)) throw spec_error("motion length must be positive");
      // Anti-aliased line segment through the center: taps get weight
      // max(0, 1 - distance), then unit-mass renormalization.
      const double theta = spec.angle_deg * std::numbers::pi / 180.0;
      const double half = 0.5 * (spec.length - 1.0);
      const double dy = std::sin(theta), dx = std::cos(theta);
      const double y0 = -half * dy, x0 = -half * dx;
      const double y1 = half * dy, x1 = half * dx;
      for (int r = 0; r < k; ++r) {
        for (int q = 0; q < k; ++q) {
          const double d = detail::point_segment_distance(r - c, q - c, y0, x0, y1, x1);
          taps[static_cast<std::size_t>(r) * k + q] = std::max(0.0, 1.0 - d);
        }
      }
      break;
    }
  }
  return KernelStack::shared(k, k, detail::normalize_taps(std::move(taps)));
}

// Synthesize a degraded observation: blur every band, then add i.i.d.
// Gaussian noise. sigma == 0 returns the convolution result bit-for-bit.
inline HsiCube degrade(const HsiCube& x, const KernelStack& kernels, const NoiseSpec& noise) {
  if (noise.sigma < 0.0) throw spec_error("noise sigma must be nonnegative");
  HsiCube y = circ_convolve(x, kernels);
  if (noise.sigma > 0.0) {
    Rng rng(noise.seed);
    for (double& v : y.data()) v += noise.sigma * rng.gaussian();
  }
  return y;
}

}  // namespace hsideconv

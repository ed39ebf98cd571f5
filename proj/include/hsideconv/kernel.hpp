#pragma once

#include <cmath>
#include <complex>
#include <cstddef>
#include <span>
#include <vector>

#include "hsideconv/errors.hpp"
#include "hsideconv/fft.hpp"

namespace hsideconv {

// Stack of 2D point-spread functions: one shared kernel (bands == 1) or one
// per spectral band. Taps are row-major with the center at ((kh-1)/2, (kw-1)/2).
class KernelStack {
 public:
  KernelStack(int bands, int kh, int kw, std::vector<double> taps)
      : bands_(bands), kh_(kh), kw_(kw), taps_(std::move(taps)) {
    if (bands < 1) throw dimension_error("kernel stack needs at least one kernel");
    if (kh < 1 || kw < 1) throw dimension_error("kernel extents must be positive");
    if (kh % 2 == 0 || kw % 2 == 0) {
      throw dimension_error("kernel extents must be odd (no implicit recentering)");
    }
    if (taps_.size() != static_cast<std::size_t>(bands) * kh * kw) {
      throw dimension_error("kernel tap count does not match bands*kh*kw");
    }
    for (double t : taps_) {
      if (!std::isfinite(t)) throw spec_error("kernel taps must be finite");
    }
  }

  static KernelStack shared(int kh, int kw, std::vector<double> taps) {
    return KernelStack(1, kh, kw, std::move(taps));
  }

  int bands() const { return bands_; }
  int kh() const { return kh_; }
  int kw() const { return kw_; }

  std::span<const double> taps_for_band(int b) const {
    const std::size_t per = static_cast<std::size_t>(kh_) * kw_;
    // a single shared kernel serves every band
    const int idx = bands_ == 1 ? 0 : b;
    return {taps_.data() + static_cast<std::size_t>(idx) * per, per};
  }

  const std::vector<double>& taps() const { return taps_; }

 private:
  int bands_ = 0, kh_ = 0, kw_ = 0;
  std::vector<double> taps_;
};

// Embed an odd-sized kernel in a rows x cols plane with its center tap moved
// to index (0,0), then take the 2D DFT. Pointwise products with the returned
// plane implement circular convolution with the kernel.
inline std::vector<std::complex<double>> psf_to_otf(std::span<const double> taps,
                                                    int kh, int kw,
                                                    int rows, int cols) {
  if (kh % 2 == 0 || kw % 2 == 0) throw dimension_error("kernel extents must be odd");
  if (kh > rows || kw > cols) throw dimension_error("kernel larger than target plane");
  if (taps.size() != static_cast<std::size_t>(kh) * kw) {
    throw dimension_error("tap count does not match kh*kw");
  }
  const int ch = (kh - 1) / 2, cw = (kw - 1) / 2;
  std::vector<std::complex<double>> plane(static_cast<std::size_t>(rows) * cols,
                                          std::complex<double>{0.0, 0.0});
  for (int r = 0; r < kh; ++r) {
    const int pr = ((r - ch) % rows + rows) % rows;
    for (int c = 0; c < kw; ++c) {
      const int pc = ((c - cw) % cols + cols) % cols;
      plane[static_cast<std::size_t>(pr) * cols + pc] += taps[static_cast<std::size_t>(r) * kw + c];
    }
  }
  fft::transform_plane(plane, rows, cols, false);
  return plane;
}

// One OTF per cube band (shared kernels are expanded by reference to the same taps).
inline std::vector<std::vector<std::complex<double>>> make_otf_stack(
    const KernelStack& kernels, int bands, int rows, int cols) {
  if (kernels.bands() != 1 && kernels.bands() != bands) {
    throw dimension_error("kernel band count must be 1 or match the cube");
  }
  std::vector<std::vector<std::complex<double>>> otfs;
  otfs.reserve(bands);
  if (kernels.bands() == 1) {
    auto shared = psf_to_otf(kernels.taps_for_band(0), kernels.kh(), kernels.kw(), rows, cols);
    for (int b = 0; b < bands; ++b) otfs.push_back(shared);
  } else {
    for (int b = 0; b < bands; ++b) {
      otfs.push_back(psf_to_otf(kernels.taps_for_band(b), kernels.kh(), kernels.kw(), rows, cols));
    }
  }
  return otfs;
}

namespace detail {

// Per-band frequency-domain filter: multiply each band's 2D spectrum by the
// band's OTF (or its conjugate) and invert.
inline HsiCube filter_per_band(const HsiCube& cube, const KernelStack& kernels, bool conjugate) {
  const auto otfs = make_otf_stack(kernels, cube.bands(), cube.rows(), cube.cols());
  FreqCube f = fft2_per_band(cube);
  const std::size_t plane = static_cast<std::size_t>(cube.rows()) * cube.cols();
  for (int b = 0; b < cube.bands(); ++b) {
    std::complex<double>* p = f.data.data() + f.index(b, 0, 0);
    const std::complex<double>* h = otfs[b].data();
    for (std::size_t i = 0; i < plane; ++i) {
      p[i] *= conjugate ? std::conj(h[i]) : h[i];
    }
  }
  return ifft2_per_band_real(f);
}

}  // namespace detail

// Circular (periodic-boundary) convolution of every band with its kernel.
inline HsiCube circ_convolve(const HsiCube& cube, const KernelStack& kernels) {
  return detail::filter_per_band(cube, kernels, false);
}

// Adjoint of circ_convolve: per-band correlation, i.e. conjugate OTF in the
// frequency domain. Satisfies <circ_convolve(a,k), b> == <a, apply_adjoint(b,k)>.
inline HsiCube apply_adjoint(const HsiCube& cube, const KernelStack& kernels) {
  return detail::filter_per_band(cube, kernels, true);
}

}  // namespace hsideconv

#pragma once

#include <algorithm>
#include <cmath>
#include <string>

#include "hsideconv/cube.hpp"
#include "hsideconv/errors.hpp"
#include "hsideconv/format.hpp"

namespace hsideconv {

// All four metrics operate on 255-scaled intensities so their magnitudes are
// comparable to the usual 8-bit-style reporting conventions.
inline constexpr double kMetricScale = 255.0;
inline constexpr double kPsnrCap = 100.0;  // stands in for +inf on zero-error bands

struct MetricReport {
  double rmse = 0.0;   // 0-255 scale
  double psnr = 0.0;   // dB, capped
  double ssim = 0.0;   // in [-1, 1]
  double ergas = 0.0;  // percent
};

inline double rmse(const HsiCube& x_hat, const HsiCube& x) {
  require_same_shape(x_hat, x);
  double sse = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double d = kMetricScale * (x_hat.data()[i] - x.data()[i]);
    sse += d * d;
  }
  return std::sqrt(sse / static_cast<double>(x.size()));
}

// Per-band 10*log10(PQ * max(X_i)^2 / ||Xhat_i - X_i||_F^2) averaged over
// bands; max is taken over the reference band. Scale-invariant.
inline double psnr(const HsiCube& x_hat, const HsiCube& x) {
  require_same_shape(x_hat, x);
  const double pq = static_cast<double>(x.rows()) * x.cols();
  double acc = 0.0;
  for (int b = 0; b < x.bands(); ++b) {
    double peak = 0.0, sse = 0.0;
    for (int i = 0; i < x.rows(); ++i) {
      for (int j = 0; j < x.cols(); ++j) {
        peak = std::max(peak, x(b, i, j));
        const double d = x_hat(b, i, j) - x(b, i, j);
        sse += d * d;
      }
    }
    if (peak <= 0.0) throw metric_error("psnr undefined for an all-zero reference band");
    const double band = sse == 0.0 ? kPsnrCap
                                   : std::min(kPsnrCap, 10.0 * std::log10(pq * peak * peak / sse));
    acc += band;
  }
  return acc / x.bands();
}

// Global-statistics SSIM per band, averaged: means, variances and covariance
// over the whole band with C1 = (0.01*255)^2, C2 = (0.03*255)^2.
inline double ssim(const HsiCube& x_hat, const HsiCube& x) {
  require_same_shape(x_hat, x);
  const double c1 = (0.01 * kMetricScale) * (0.01 * kMetricScale);
  const double c2 = (0.03 * kMetricScale) * (0.03 * kMetricScale);
  const double pq = static_cast<double>(x.rows()) * x.cols();
  double acc = 0.0;
  for (int b = 0; b < x.bands(); ++b) {
    double m1 = 0.0, m2 = 0.0;
    for (int i = 0; i < x.rows(); ++i) {
      for (int j = 0; j < x.cols(); ++j) {
        m1 += kMetricScale * x_hat(b, i, j);
        m2 += kMetricScale * x(b, i, j);
      }
    }
    m1 /= pq;
    m2 /= pq;
    double v1 = 0.0, v2 = 0.0, cov = 0.0;
    for (int i = 0; i < x.rows(); ++i) {
      for (int j = 0; j < x.cols(); ++j) {
        const double a = kMetricScale * x_hat(b, i, j) - m1;
        const double c = kMetricScale * x(b, i, j) - m2;
        v1 += a * a;
        v2 += c * c;
        cov += a * c;
      }
    }
    v1 /= pq;
    v2 /= pq;
    cov /= pq;
    acc += ((2.0 * m1 * m2 + c1) * (2.0 * cov + c2)) /
           ((m1 * m1 + m2 * m2 + c1) * (v1 + v2 + c2));
  }
  return acc / x.bands();
}

// Relative global error in percent: 100 * sqrt(mean over bands of per-pixel
// MSE over squared band mean). The denominator uses the reference band mean
// by default; `reference_mean = false` keeps the estimate's mean instead.
inline double ergas(const HsiCube& x_hat, const HsiCube& x, bool reference_mean = true) {
  require_same_shape(x_hat, x);
  const double pq = static_cast<double>(x.rows()) * x.cols();
  double acc = 0.0;
  for (int b = 0; b < x.bands(); ++b) {
    double sse = 0.0, mean = 0.0;
    for (int i = 0; i < x.rows(); ++i) {
      for (int j = 0; j < x.cols(); ++j) {
        const double d = kMetricScale * (x_hat(b, i, j) - x(b, i, j));
        sse += d * d;
        mean += kMetricScale * (reference_mean ? x(b, i, j) : x_hat(b, i, j));
      }
    }
    mean /= pq;
    if (mean == 0.0) throw metric_error("ergas undefined for a zero-mean band");
    acc += (sse / pq) / (mean * mean);
  }
  return 100.0 * std::sqrt(acc / x.bands());
}

inline MetricReport compute_metrics(const HsiCube& x_hat, const HsiCube& x) {
  return {rmse(x_hat, x), psnr(x_hat, x), ssim(x_hat, x), ergas(x_hat, x)};
}

// One CSV row in the column order rmse,psnr,ssim,ergas.
inline std::string metric_csv_row(const MetricReport& r) {
  return fmt_double(r.rmse) + "," + fmt_double(r.psnr) + "," + fmt_double(r.ssim) + "," +
         fmt_double(r.ergas);
}

}  // namespace hsideconv

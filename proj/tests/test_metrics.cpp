#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "hsideconv/metrics.hpp"
#include "oracles.hpp"

using hsideconv::ergas;
using hsideconv::HsiCube;
using hsideconv::psnr;
using hsideconv::rmse;
using hsideconv::ssim;

TEST_CASE("identical cubes hit every metric fixed point", "[metrics]") {
  const HsiCube x = oracles::random_cube(3, 8, 8, 600, 0.1, 0.9);
  REQUIRE(rmse(x, x) == 0.0);
  REQUIRE(psnr(x, x) == 100.0);
  REQUIRE(ssim(x, x) == 1.0);
  REQUIRE(ergas(x, x) == 0.0);
  const auto rep = hsideconv::compute_metrics(x, x);
  REQUIRE(hsideconv::metric_csv_row(rep) == "0,100,1,0");
}

TEST_CASE("a constant 1/255 offset gives rmse exactly 1", "[metrics]") {
  const HsiCube x = oracles::random_cube(2, 6, 6, 601, 0.1, 0.8);
  HsiCube y = x;
  for (double& v : y.data()) v += 1.0 / 255.0;
  REQUIRE(rmse(y, x) == Catch::Approx(1.0).margin(1e-12));
}

TEST_CASE("hand-computed 2x2x2 rmse case", "[metrics]") {
  HsiCube x(2, 2, 2, 0.0);
  HsiCube y(2, 2, 2, 0.0);
  y(0, 0, 0) = 3.0 / 255.0;
  y(0, 0, 1) = 4.0 / 255.0;
  REQUIRE(rmse(y, x) == Catch::Approx(std::sqrt(25.0 / 8.0)).margin(1e-12));
}

TEST_CASE("rmse is invariant under a common voxel permutation", "[metrics]") {
  const HsiCube a = oracles::random_cube(2, 4, 4, 602, 0.0, 1.0);
  const HsiCube b = oracles::random_cube(2, 4, 4, 603, 0.0, 1.0);
  std::vector<std::size_t> perm(a.size());
  std::iota(perm.begin(), perm.end(), 0);
  hsideconv::Rng rng(604);
  for (std::size_t i = perm.size() - 1; i > 0; --i) {
    std::swap(perm[i], perm[rng.uniform_int(static_cast<int>(i + 1))]);
  }
  HsiCube ap(2, 4, 4), bp(2, 4, 4);
  for (std::size_t i = 0; i < perm.size(); ++i) {
    ap.data()[i] = a.data()[perm[i]];
    bp.data()[i] = b.data()[perm[i]];
  }
  REQUIRE(rmse(a, b) == Catch::Approx(rmse(ap, bp)).margin(1e-12));
}

TEST_CASE("psnr evaluates the printed formula", "[metrics]") {
  // single band, reference max 1, per-pixel MSE 1e-4 -> 40 dB
  HsiCube x(1, 16, 16, 0.5);
  x(0, 0, 0) = 1.0;
  HsiCube y = x;
  for (double& v : y.data()) v += 0.01;
  REQUIRE(psnr(y, x) == Catch::Approx(40.0).margin(1e-9));

  // scale covariance: doubling both cubes changes nothing
  REQUIRE(psnr(2.0 * y, 2.0 * x) == Catch::Approx(psnr(y, x)).margin(1e-12));
}

TEST_CASE("psnr rejects all-zero reference bands", "[metrics]") {
  const HsiCube x(1, 4, 4, 0.0);
  const HsiCube y(1, 4, 4, 0.1);
  REQUIRE_THROWS_AS(psnr(y, x), hsideconv::metric_error);
}

TEST_CASE("ssim of a constant estimate against a zero-mean band is near zero", "[metrics]") {
  HsiCube x(1, 64, 64, 0.0);
  hsideconv::Rng rng(610);
  for (double& v : x.data()) v += 0.2 * rng.gaussian();  // std 0.2 -> 51 on 255 scale
  double mean = std::accumulate(x.data().begin(), x.data().end(), 0.0) / x.size();
  for (double& v : x.data()) v -= mean;  // exactly zero-mean
  const HsiCube y(1, 64, 64, 0.5);
  REQUIRE(std::abs(ssim(y, x)) < 0.05);
}

TEST_CASE("ssim of a shifted band matches the closed-form reduction", "[metrics]") {
  const HsiCube x = oracles::random_cube(1, 8, 8, 611, 0.2, 0.8);
  HsiCube y = x;
  for (double& v : y.data()) v += 10.0 / 255.0;

  double mu = 0.0;
  for (double v : x.data()) mu += 255.0 * v;
  mu /= static_cast<double>(x.size());
  const double c1 = (0.01 * 255.0) * (0.01 * 255.0);
  // shift leaves variances and covariance equal, so the sigma factor cancels
  const double expected = (2.0 * mu * mu + 20.0 * mu + c1) /
                          (2.0 * mu * mu + 20.0 * mu + 100.0 + c1);
  REQUIRE(ssim(y, x) == Catch::Approx(expected).margin(1e-10));
}

TEST_CASE("ergas reduces to 100 m / mu for a uniform single-band error", "[metrics]") {
  const HsiCube x(1, 8, 8, 0.4);
  HsiCube y = x;
  for (double& v : y.data()) v += 0.02;
  REQUIRE(ergas(y, x) == Catch::Approx(100.0 * 0.02 / 0.4).margin(1e-9));
}

TEST_CASE("ergas is scale invariant and supports the printed-denominator variant", "[metrics]") {
  const HsiCube x = oracles::random_cube(3, 8, 8, 620, 0.2, 0.9);
  const HsiCube y = oracles::random_cube(3, 8, 8, 621, 0.2, 0.9);
  REQUIRE(ergas(2.0 * y, 2.0 * x) == Catch::Approx(ergas(y, x)).margin(1e-12));

  const double ref_mean = ergas(y, x, true);
  const double est_mean = ergas(y, x, false);
  REQUIRE(ref_mean != est_mean);  // different denominators on generic inputs
}

TEST_CASE("ergas rejects zero-mean reference bands", "[metrics]") {
  HsiCube x(1, 4, 4, 0.0);
  const HsiCube y(1, 4, 4, 0.1);
  REQUIRE_THROWS_AS(ergas(y, x), hsideconv::metric_error);
}

TEST_CASE("shape mismatches are rejected across the board", "[metrics]") {
  const HsiCube a(2, 4, 4, 0.5);
  const HsiCube b(2, 4, 5, 0.5);
  REQUIRE_THROWS_AS(rmse(a, b), hsideconv::dimension_error);
  REQUIRE_THROWS_AS(psnr(a, b), hsideconv::dimension_error);
  REQUIRE_THROWS_AS(ssim(a, b), hsideconv::dimension_error);
  REQUIRE_THROWS_AS(ergas(a, b), hsideconv::dimension_error);
}

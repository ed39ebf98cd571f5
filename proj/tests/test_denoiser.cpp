#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <cstring>
#include <vector>

#include "hsideconv/b3ddn.hpp"
#include "hsideconv/denoiser.hpp"
#include "hsideconv/metrics.hpp"
#include "hsideconv/synthetic.hpp"
#include "oracles.hpp"

using hsideconv::B3ddnWeights;
using hsideconv::b3ddn_denoise;
using hsideconv::b3ddn_forward;
using hsideconv::baseline_denoise;
using hsideconv::BatchNorm3d;
using hsideconv::Conv3d;
using hsideconv::HsiCube;
using hsideconv::make_b3ddn;

namespace {

// Literal reference forward pass: nothing shared with the library loops.
HsiCube naive_b3ddn_forward(const HsiCube& z, const B3ddnWeights& w) {
  const int nb = z.bands(), np = z.rows(), nq = z.cols();
  auto conv = [&](const std::vector<std::vector<double>>& in, const Conv3d& c) {
    std::vector<std::vector<double>> out(
        c.out_channels, std::vector<double>(static_cast<std::size_t>(nb) * np * nq, 0.0));
    for (int o = 0; o < c.out_channels; ++o) {
      for (int b = 0; b < nb; ++b) {
        for (int i = 0; i < np; ++i) {
          for (int j = 0; j < nq; ++j) {
            double acc = c.bias[o];
            for (int ic = 0; ic < c.in_channels; ++ic) {
              for (int dz = -1; dz <= 1; ++dz) {
                for (int dy = -1; dy <= 1; ++dy) {
                  for (int dx = -1; dx <= 1; ++dx) {
                    const int zz = (b + dz + nb) % nb;
                    const int yy = (i + dy + np) % np;
                    const int xx = (j + dx + nq) % nq;
                    const int tap = (dz + 1) * 9 + (dy + 1) * 3 + (dx + 1);
                    acc += c.weights[c.weight_index(o, ic, tap)] *
                           in[ic][(static_cast<std::size_t>(zz) * np + yy) * nq + xx];
                  }
                }
              }
            }
            out[o][(static_cast<std::size_t>(b) * np + i) * nq + j] = acc;
          }
        }
      }
    }
    return out;
  };

  std::vector<std::vector<double>> cur(1);
  cur[0] = z.data();
  for (std::size_t idx = 0; idx < w.layers.size(); ++idx) {
    if (const auto* c = std::get_if<Conv3d>(&w.layers[idx])) {
      cur = conv(cur, *c);
      if (idx == 0) {
        for (auto& ch : cur) {
          for (double& v : ch) v = std::max(0.0, v);
        }
      }
    } else {
      const auto& bn = std::get<BatchNorm3d>(w.layers[idx]);
      for (int c = 0; c < bn.channels; ++c) {
        for (double& v : cur[c]) {
          v = bn.scale[c] * (v - bn.running_mean[c]) / std::sqrt(bn.running_var[c] + bn.epsilon) +
              bn.shift[c];
          v = std::max(0.0, v);
        }
      }
    }
  }
  HsiCube out(nb, np, nq);
  out.data() = cur[0];
  return out;
}

}  // namespace

TEST_CASE("baseline denoiser at strength 0 is the identity", "[denoiser]") {
  const HsiCube z = oracles::random_cube(3, 8, 8, 500, 0.0, 1.0);
  REQUIRE(oracles::max_abs_diff(baseline_denoise(z, 0.0), z) < 1e-12);
}

TEST_CASE("baseline denoiser strictly shrinks white-noise energy", "[denoiser]") {
  const HsiCube z = oracles::gaussian_cube(4, 16, 16, 501);
  const HsiCube out = baseline_denoise(z, 3.0);
  REQUIRE(out.frobenius_norm() < z.frobenius_norm());
  REQUIRE(out.all_finite());
}

TEST_CASE("baseline denoiser improves RMSE on a smooth cube for some sweep strength",
          "[denoiser]") {
  const HsiCube clean = hsideconv::make_smooth_cube(4, 16, 16, 502);
  HsiCube noisy = clean;
  hsideconv::Rng rng(503);
  for (double& v : noisy.data()) v += 0.05 * rng.gaussian();
  const double before = hsideconv::rmse(noisy, clean);
  double best = before;
  for (double s : {0.5, 1.0, 2.0, 3.0}) {
    best = std::min(best, hsideconv::rmse(baseline_denoise(noisy, s), clean));
  }
  REQUIRE(best < before);
}

TEST_CASE("negative shrinkage strength is rejected", "[denoiser]") {
  const HsiCube z(1, 4, 4, 0.5);
  REQUIRE_THROWS_AS(baseline_denoise(z, -1.0), hsideconv::spec_error);
}

TEST_CASE("all-zero weights produce an all-zero noise estimate", "[denoiser]") {
  B3ddnWeights w = make_b3ddn(2, 4, 7);
  for (auto& layer : w.layers) {
    if (auto* conv = std::get_if<Conv3d>(&layer)) {
      std::fill(conv->weights.begin(), conv->weights.end(), 0.0);
      std::fill(conv->bias.begin(), conv->bias.end(), 0.0);
    }
  }
  const HsiCube z = oracles::random_cube(3, 5, 5, 504, 0.0, 1.0);
  const HsiCube out = b3ddn_forward(z, w);
  for (double v : out.data()) REQUIRE(v == 0.0);

  // ...which makes the denoiser the identity
  REQUIRE(oracles::max_abs_diff(b3ddn_denoise(z, w), z) < 1e-15);
}

TEST_CASE("identity-initialized two-conv network copies nonnegative inputs", "[denoiser]") {
  B3ddnWeights w;
  w.num_blocks = 0;
  w.channels = 1;
  Conv3d c1(1, 1), c2(1, 1);
  c1.weights[13] = 1.0;  // center tap
  c2.weights[13] = 1.0;
  w.layers.push_back(c1);
  w.layers.push_back(c2);
  w.validate();
  const HsiCube z = oracles::random_cube(3, 5, 5, 505, 0.0, 1.0);
  const HsiCube out = b3ddn_forward(z, w);
  REQUIRE(std::memcmp(out.data().data(), z.data().data(), z.size() * sizeof(double)) == 0);
}

TEST_CASE("forward pass matches the literal nested-loop oracle", "[denoiser]") {
  B3ddnWeights w = make_b3ddn(1, 4, 42);
  // make the batch-norm statistics and the output conv non-trivial
  auto& bn = std::get<BatchNorm3d>(w.layers[2]);
  hsideconv::Rng rng(43);
  for (int c = 0; c < bn.channels; ++c) {
    bn.scale[c] = rng.uniform(0.5, 1.5);
    bn.shift[c] = rng.uniform(-0.2, 0.2);
    bn.running_mean[c] = rng.uniform(-0.1, 0.1);
    bn.running_var[c] = rng.uniform(0.5, 2.0);
  }
  for (double& v : std::get<Conv3d>(w.layers.back()).weights) v = rng.uniform(-0.3, 0.3);
  const HsiCube z = oracles::random_cube(3, 5, 5, 44, 0.0, 1.0);
  REQUIRE(oracles::max_abs_diff(b3ddn_forward(z, w), naive_b3ddn_forward(z, w)) < 1e-8);
}

TEST_CASE("denoise output is exactly input minus forward", "[denoiser]") {
  B3ddnWeights w = make_b3ddn(1, 4, 45);
  hsideconv::Rng rng(452);
  for (double& v : std::get<Conv3d>(w.layers.back()).weights) v = rng.uniform(-0.3, 0.3);
  const HsiCube z = oracles::random_cube(4, 6, 6, 46, 0.0, 1.0);
  const HsiCube f = b3ddn_forward(z, w);
  const HsiCube d = b3ddn_denoise(z, w);
  for (std::size_t i = 0; i < z.size(); ++i) {
    REQUIRE(d.data()[i] == z.data()[i] - f.data()[i]);
  }
}

TEST_CASE("one set of weights serves any band count", "[denoiser]") {
  const B3ddnWeights w = make_b3ddn(2, 4, 47);
  for (int bands : {3, 31, 45}) {
    const HsiCube z = oracles::random_cube(bands, 4, 4, 48 + bands, 0.0, 1.0);
    const HsiCube out = b3ddn_denoise(z, w);
    REQUIRE(out.bands() == bands);
    REQUIRE(out.rows() == 4);
    REQUIRE(out.cols() == 4);
    REQUIRE(out.all_finite());
  }
}

TEST_CASE("malformed weights are rejected", "[denoiser]") {
  B3ddnWeights w = make_b3ddn(1, 4, 49);
  std::get<Conv3d>(w.layers[1]).in_channels = 3;  // break the chain
  REQUIRE_THROWS_AS(w.validate(), hsideconv::weights_error);

  B3ddnWeights w2 = make_b3ddn(1, 4, 50);
  std::get<BatchNorm3d>(w2.layers[2]).running_var[0] = 0.0;
  REQUIRE_THROWS_AS(w2.validate(), hsideconv::weights_error);

  B3ddnWeights w3 = make_b3ddn(1, 4, 51);
  const HsiCube z(2, 4, 4, 0.5);
  std::get<Conv3d>(w3.layers[0]).bias.clear();
  REQUIRE_THROWS_AS(b3ddn_forward(z, w3), hsideconv::weights_error);
}

TEST_CASE("weight initialization is deterministic in the seed", "[denoiser]") {
  const B3ddnWeights a = make_b3ddn(2, 8, 1234);
  const B3ddnWeights b = make_b3ddn(2, 8, 1234);
  const auto& ca = std::get<Conv3d>(a.layers[0]);
  const auto& cb = std::get<Conv3d>(b.layers[0]);
  REQUIRE(ca.weights == cb.weights);
}

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <variant>
#include <vector>

#include "hsideconv/cube.hpp"
#include "hsideconv/denoiser.hpp"
#include "hsideconv/errors.hpp"
#include "hsideconv/rng.hpp"

namespace hsideconv {

// 3D convolution layer with fixed 3x3x3 taps and periodic padding.
// Weight layout: [out_channel][in_channel][dz][dy][dx], 27 taps per pair.
struct Conv3d {
  int in_channels = 0;
  int out_channels = 0;
  std::vector<double> weights;
  std::vector<double> bias;

  static constexpr int kTaps = 27;

  Conv3d() = default;
  Conv3d(int in_c, int out_c)
      : in_channels(in_c), out_channels(out_c),
        weights(static_cast<std::size_t>(in_c) * out_c * kTaps, 0.0),
        bias(out_c, 0.0) {}

  std::size_t weight_index(int o, int i, int t) const {
    return (static_cast<std::size_t>(o) * in_channels + i) * kTaps + t;
  }
};

// Per-channel batch normalization over (band, row, col).
struct BatchNorm3d {
  int channels = 0;
  std::vector<double> scale, shift, running_mean, running_var;
  double epsilon = 1e-5;

  BatchNorm3d() = default;
  explicit BatchNorm3d(int c)
      : channels(c), scale(c, 1.0), shift(c, 0.0),
        running_mean(c, 0.0), running_var(c, 1.0) {}
};

using B3ddnLayer = std::variant<Conv3d, BatchNorm3d>;

// Blind 3D denoising network parameters. Forward order: conv(1->C), ReLU,
// then num_blocks times [conv(C->C), BN(C), ReLU], then conv(C->1). The
// network predicts the noise residual; the band count of the input is free.
struct B3ddnWeights {
  int num_blocks = 0;  // B
  int channels = 0;    // C
  std::vector<B3ddnLayer> layers;

  void validate() const {
    if (num_blocks < 0 || channels < 1) throw weights_error("bad block/channel counts");
    const std::size_t expected = 2 + 2 * static_cast<std::size_t>(num_blocks);
    if (layers.size() != expected) throw weights_error("layer count does not match topology");
    int carried = 1;
    for (std::size_t idx = 0; idx < layers.size(); ++idx) {
      const bool want_bn = idx > 0 && idx + 1 < layers.size() && idx % 2 == 0;
      if (want_bn) {
        const auto* bn = std::get_if<BatchNorm3d>(&layers[idx]);
        if (!bn) throw weights_error("expected a batch-norm layer");
        if (bn->channels != carried) throw weights_error("batch-norm channel mismatch");
        if (bn->scale.size() != static_cast<std::size_t>(bn->channels) ||
            bn->shift.size() != static_cast<std::size_t>(bn->channels) ||
            bn->running_mean.size() != static_cast<std::size_t>(bn->channels) ||
            bn->running_var.size() != static_cast<std::size_t>(bn->channels)) {
          throw weights_error("batch-norm parameter sizes mismatch");
        }
        for (double v : bn->running_var) {
          if (!(v > 0.0)) throw weights_error("running variances must be strictly positive");
        }
        if (!(bn->epsilon > 0.0)) throw weights_error("batch-norm epsilon must be positive");
      } else {
        const auto* conv = std::get_if<Conv3d>(&layers[idx]);
        if (!conv) throw weights_error("expected a convolution layer");
        if (conv->in_channels != carried) throw weights_error("convolution channel chain broken");
        const int want_out = idx + 1 == layers.size() ? 1 : channels;
        if (conv->out_channels != want_out) throw weights_error("convolution channel chain broken");
        if (conv->weights.size() !=
                static_cast<std::size_t>(conv->in_channels) * conv->out_channels * Conv3d::kTaps ||
            conv->bias.size() != static_cast<std::size_t>(conv->out_channels)) {
          throw weights_error("convolution parameter sizes mismatch");
        }
        for (double v : conv->weights) {
          if (!std::isfinite(v)) throw weights_error("convolution weights must be finite");
        }
        carried = conv->out_channels;
      }
    }
    if (carried != 1) throw weights_error("network must end in a single channel");
  }
};

// He-style initialization for the hidden convolutions (taps ~ N(0, 2/fan_in),
// biases zero, BN at identity). The output convolution starts at zero, so the
// residual prediction is zero and an untrained denoiser is the identity map;
// training moves the branch away from a safe starting point instead of
// spending its budget un-doing a loud random one.
inline B3ddnWeights make_b3ddn(int num_blocks, int channels, std::uint64_t seed) {
  if (num_blocks < 0 || channels < 1) throw weights_error("bad block/channel counts");
  Rng rng(seed);
  auto init_conv = [&rng](int in_c, int out_c, double gain) {
    Conv3d conv(in_c, out_c);
    const double stddev = gain * std::sqrt(2.0 / (static_cast<double>(in_c) * Conv3d::kTaps));
    for (double& w : conv.weights) w = stddev * rng.gaussian();
    return conv;
  };
  B3ddnWeights w;
  w.num_blocks = num_blocks;
  w.channels = channels;
  w.layers.push_back(init_conv(1, channels, 1.0));
  for (int b = 0; b < num_blocks; ++b) {
    w.layers.push_back(init_conv(channels, channels, 1.0));
    w.layers.push_back(BatchNorm3d(channels));
  }
  w.layers.push_back(Conv3d(channels, 1));
  w.validate();
  return w;
}

namespace detail {

// Channel-major feature map over a (n, p, q) grid.
struct FeatureMap {
  int channels = 0, n = 0, p = 0, q = 0;
  std::vector<double> v;

  FeatureMap() = default;
  FeatureMap(int c, int nn, int pp, int qq)
      : channels(c), n(nn), p(pp), q(qq),
        v(static_cast<std::size_t>(c) * nn * pp * qq, 0.0) {}

  std::size_t voxels() const { return static_cast<std::size_t>(n) * p * q; }
  double* channel(int c) { return v.data() + static_cast<std::size_t>(c) * voxels(); }
  const double* channel(int c) const { return v.data() + static_cast<std::size_t>(c) * voxels(); }
};

// For every voxel, the flat indices of its 27 periodic neighbors in tap order
// (dz, dy, dx each in {-1, 0, +1}).
inline std::vector<std::int64_t> neighbor_table(int n, int p, int q) {
  const std::size_t l = static_cast<std::size_t>(n) * p * q;
  std::vector<std::int64_t> nbr(l * Conv3d::kTaps);
  std::size_t at = 0;
  for (int z = 0; z < n; ++z) {
    for (int y = 0; y < p; ++y) {
      for (int x = 0; x < q; ++x) {
        for (int dz = -1; dz <= 1; ++dz) {
          const int zz = (z + dz + n) % n;
          for (int dy = -1; dy <= 1; ++dy) {
            const int yy = (y + dy + p) % p;
            for (int dx = -1; dx <= 1; ++dx) {
              const int xx = (x + dx + q) % q;
              nbr[at++] = (static_cast<std::int64_t>(zz) * p + yy) * q + xx;
            }
          }
        }
      }
    }
  }
  return nbr;
}

inline void conv3d_forward(const FeatureMap& in, const Conv3d& conv,
                           const std::vector<std::int64_t>& nbr, FeatureMap& out) {
  out = FeatureMap(conv.out_channels, in.n, in.p, in.q);
  const std::size_t l = in.voxels();
  for (int o = 0; o < conv.out_channels; ++o) {
    double* dst = out.channel(o);
    std::fill(dst, dst + l, conv.bias[o]);
    for (int i = 0; i < conv.in_channels; ++i) {
      const double* src = in.channel(i);
      const double* w = conv.weights.data() + conv.weight_index(o, i, 0);
      for (std::size_t v = 0; v < l; ++v) {
        const std::int64_t* nb = nbr.data() + v * Conv3d::kTaps;
        double acc = 0.0;
        for (int t = 0; t < Conv3d::kTaps; ++t) acc += w[t] * src[nb[t]];
        dst[v] += acc;
      }
    }
  }
}

inline void bn_forward_inference(FeatureMap& f, const BatchNorm3d& bn) {
  const std::size_t l = f.voxels();
  for (int c = 0; c < bn.channels; ++c) {
    const double a = bn.scale[c] / std::sqrt(bn.running_var[c] + bn.epsilon);
    const double b = bn.shift[c] - a * bn.running_mean[c];
    double* p = f.channel(c);
    for (std::size_t v = 0; v < l; ++v) p[v] = a * p[v] + b;
  }
}

inline void relu_inplace(FeatureMap& f) {
  for (double& x : f.v) x = std::max(0.0, x);
}

}  // namespace detail

// Forward pass of the residual-predicting network (inference mode: batch
// normalization uses running statistics). Output shape equals input shape.
inline HsiCube b3ddn_forward(const HsiCube& z, const B3ddnWeights& weights) {
  weights.validate();
  const auto nbr = detail::neighbor_table(z.bands(), z.rows(), z.cols());
  detail::FeatureMap cur(1, z.bands(), z.rows(), z.cols());
  cur.v = z.data();
  detail::FeatureMap next;
  for (std::size_t idx = 0; idx < weights.layers.size(); ++idx) {
    if (const auto* conv = std::get_if<Conv3d>(&weights.layers[idx])) {
      detail::conv3d_forward(cur, *conv, nbr, next);
      cur = std::move(next);
      if (idx == 0 && weights.layers.size() > 1) detail::relu_inplace(cur);
    } else {
      detail::bn_forward_inference(cur, std::get<BatchNorm3d>(weights.layers[idx]));
      detail::relu_inplace(cur);
    }
  }
  HsiCube out(z.bands(), z.rows(), z.cols());
  out.data() = std::move(cur.v);
  return out;
}

// Blind denoising by residual learning: estimate the noise, subtract it.
inline HsiCube b3ddn_denoise(const HsiCube& z, const B3ddnWeights& weights) {
  HsiCube noise = b3ddn_forward(z, weights);
  HsiCube out = z;
  for (std::size_t i = 0; i < out.size(); ++i) out.data()[i] = z.data()[i] - noise.data()[i];
  return out;
}

inline Denoiser make_b3ddn_denoiser(B3ddnWeights weights) {
  weights.validate();
  return [weights = std::move(weights)](const HsiCube& z) { return b3ddn_denoise(z, weights); };
}

}  // namespace hsideconv

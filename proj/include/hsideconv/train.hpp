#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <utility>
#include <vector>

#include "hsideconv/b3ddn.hpp"
#include "hsideconv/cube.hpp"
#include "hsideconv/errors.hpp"
#include "hsideconv/rng.hpp"

namespace hsideconv {

struct TrainOptions {
  double learning_rate = 0.0002;
  int batch_size = 4;
  int epochs = 10;
  int patch_size = 12;
  double noise_lo = 0.2 / 255.0;  // augmentation noise std, [0,1] intensity scale
  double noise_hi = 10.0 / 255.0;
  std::uint64_t seed = 0;

  void validate() const {
    if (learning_rate < 0.0) throw spec_error("learning rate must be nonnegative");
    if (batch_size < 1) throw spec_error("batch size must be >= 1");
    if (epochs < 1) throw spec_error("epochs must be >= 1");
    if (patch_size < 1) throw spec_error("patch size must be >= 1");
    if (!(noise_lo > 0.0) || !(noise_hi < 1.0) || noise_lo > noise_hi) {
      throw spec_error("noise range must satisfy 0 < lo <= hi < 1");
    }
  }
};

// One training pair: `noisy` = `clean` + i.i.d. Gaussian noise of some level.
struct BatchSample {
  HsiCube noisy, clean;
};

// Same layer structure as the weights, with every numeric field zeroed; used
// as the container for gradients and optimizer moments.
inline B3ddnWeights zeros_like(const B3ddnWeights& w) {
  B3ddnWeights z = w;
  for (auto& layer : z.layers) {
    if (auto* conv = std::get_if<Conv3d>(&layer)) {
      std::fill(conv->weights.begin(), conv->weights.end(), 0.0);
      std::fill(conv->bias.begin(), conv->bias.end(), 0.0);
    } else {
      auto& bn = std::get<BatchNorm3d>(layer);
      std::fill(bn.scale.begin(), bn.scale.end(), 0.0);
      std::fill(bn.shift.begin(), bn.shift.end(), 0.0);
      std::fill(bn.running_mean.begin(), bn.running_mean.end(), 0.0);
      std::fill(bn.running_var.begin(), bn.running_var.end(), 0.0);
    }
  }
  return z;
}

// Pointers to the trainable parameters (conv taps and biases, batch-norm
// scales and shifts) in layer order. Valid until the weights object moves.
inline std::vector<double*> trainable_parameters(B3ddnWeights& w) {
  std::vector<double*> out;
  for (auto& layer : w.layers) {
    if (auto* conv = std::get_if<Conv3d>(&layer)) {
      for (double& v : conv->weights) out.push_back(&v);
      for (double& v : conv->bias) out.push_back(&v);
    } else {
      auto& bn = std::get<BatchNorm3d>(layer);
      for (double& v : bn.scale) out.push_back(&v);
      for (double& v : bn.shift) out.push_back(&v);
    }
  }
  return out;
}

namespace detail {

struct BnBatchStats {
  std::vector<double> mean, var;  // per channel, biased variance
};

struct LossGrads {
  double loss = 0.0;
  B3ddnWeights grads;                    // same shape as the weights
  std::vector<BnBatchStats> bn_stats;    // one entry per block, forward order
};

// Training-mode forward and (optionally) backward over one mini-batch.
// Batch normalization uses statistics of this batch; the L1 loss is averaged
// over all samples and voxels with the subgradient convention sign(0) = 0.
inline LossGrads batch_loss_and_gradients(const B3ddnWeights& w,
                                          const std::vector<BatchSample>& batch,
                                          bool want_grads) {
  w.validate();
  if (batch.empty()) throw data_error("empty training batch");
  const HsiCube& first = batch.front().noisy;
  for (const auto& s : batch) {
    if (!s.noisy.same_shape(first) || !s.clean.same_shape(first)) {
      throw data_error("batch samples must share one shape");
    }
  }
  const int ns = static_cast<int>(batch.size());
  const int nb = first.bands(), np = first.rows(), nq = first.cols();
  const auto nbr = neighbor_table(nb, np, nq);
  const std::size_t l = first.size();
  const double denom = static_cast<double>(ns) * static_cast<double>(l);

  // layer handles in forward order
  const Conv3d& conv_in = std::get<Conv3d>(w.layers.front());
  const Conv3d& conv_out = std::get<Conv3d>(w.layers.back());
  std::vector<const Conv3d*> block_convs;
  std::vector<const BatchNorm3d*> block_bns;
  for (int k = 0; k < w.num_blocks; ++k) {
    block_convs.push_back(&std::get<Conv3d>(w.layers[1 + 2 * k]));
    block_bns.push_back(&std::get<BatchNorm3d>(w.layers[2 + 2 * k]));
  }

  // stages[t][s]: post-activation features entering conv t
  // (stage 0 = network input, stage k+1 = output of block k's ReLU).
  std::vector<std::vector<FeatureMap>> stages(w.num_blocks + 2);
  std::vector<std::vector<FeatureMap>> xhat(w.num_blocks);  // per block, per sample
  std::vector<BnBatchStats> stats(w.num_blocks);
  std::vector<std::vector<double>> invstd(w.num_blocks);
  std::vector<FeatureMap> pred(ns);

  stages[0].resize(ns);
  for (int s = 0; s < ns; ++s) {
    stages[0][s] = FeatureMap(1, nb, np, nq);
    stages[0][s].v = batch[s].noisy.data();
  }
  stages[1].resize(ns);
  for (int s = 0; s < ns; ++s) {
    conv3d_forward(stages[0][s], conv_in, nbr, stages[1][s]);
    relu_inplace(stages[1][s]);
  }
  for (int k = 0; k < w.num_blocks; ++k) {
    const int c = w.channels;
    std::vector<FeatureMap> z(ns);
    for (int s = 0; s < ns; ++s) conv3d_forward(stages[k + 1][s], *block_convs[k], nbr, z[s]);
    // batch statistics across samples and space
    stats[k].mean.assign(c, 0.0);
    stats[k].var.assign(c, 0.0);
    invstd[k].assign(c, 0.0);
    const double m = static_cast<double>(ns) * static_cast<double>(l);
    for (int ch = 0; ch < c; ++ch) {
      double sum = 0.0;
      for (int s = 0; s < ns; ++s) {
        const double* p = z[s].channel(ch);
        for (std::size_t v = 0; v < l; ++v) sum += p[v];
      }
      const double mean = sum / m;
      double var = 0.0;
      for (int s = 0; s < ns; ++s) {
        const double* p = z[s].channel(ch);
        for (std::size_t v = 0; v < l; ++v) var += (p[v] - mean) * (p[v] - mean);
      }
      var /= m;
      stats[k].mean[ch] = mean;
      stats[k].var[ch] = var;
      invstd[k][ch] = 1.0 / std::sqrt(var + block_bns[k]->epsilon);
    }
    xhat[k].resize(ns);
    stages[k + 2].resize(ns);
    for (int s = 0; s < ns; ++s) {
      xhat[k][s] = FeatureMap(c, nb, np, nq);
      stages[k + 2][s] = FeatureMap(c, nb, np, nq);
      for (int ch = 0; ch < c; ++ch) {
        const double* zp = z[s].channel(ch);
        double* xp = xhat[k][s].channel(ch);
        double* yp = stages[k + 2][s].channel(ch);
        const double mu = stats[k].mean[ch], is = invstd[k][ch];
        const double g = block_bns[k]->scale[ch], b = block_bns[k]->shift[ch];
        for (std::size_t v = 0; v < l; ++v) {
          xp[v] = (zp[v] - mu) * is;
          yp[v] = std::max(0.0, g * xp[v] + b);
        }
      }
    }
  }
  for (int s = 0; s < ns; ++s) {
    conv3d_forward(stages[w.num_blocks + 1][s], conv_out, nbr, pred[s]);
  }

  LossGrads out;
  out.bn_stats = stats;
  double loss = 0.0;
  for (int s = 0; s < ns; ++s) {
    const double* p = pred[s].channel(0);
    for (std::size_t v = 0; v < l; ++v) {
      const double target = batch[s].noisy.data()[v] - batch[s].clean.data()[v];
      loss += std::abs(p[v] - target);
    }
  }
  out.loss = loss / denom;
  if (!want_grads) return out;

  out.grads = zeros_like(w);
  Conv3d& g_conv_in = std::get<Conv3d>(out.grads.layers.front());
  Conv3d& g_conv_out = std::get<Conv3d>(out.grads.layers.back());

  auto conv_backward = [&](const Conv3d& conv, Conv3d& grad,
                           const std::vector<FeatureMap>& inputs,
                           const std::vector<FeatureMap>& gout,
                           std::vector<FeatureMap>* gin) {
    if (gin) {
      gin->assign(ns, FeatureMap());
      for (int s = 0; s < ns; ++s) (*gin)[s] = FeatureMap(conv.in_channels, nb, np, nq);
    }
    for (int s = 0; s < ns; ++s) {
      for (int o = 0; o < conv.out_channels; ++o) {
        const double* gp = gout[s].channel(o);
        double gb = 0.0;
        for (std::size_t v = 0; v < l; ++v) gb += gp[v];
        grad.bias[o] += gb;
        for (int i = 0; i < conv.in_channels; ++i) {
          const double* ip = inputs[s].channel(i);
          double* gw = grad.weights.data() + conv.weight_index(o, i, 0);
          const double* wp = conv.weights.data() + conv.weight_index(o, i, 0);
          double* gi = gin ? (*gin)[s].channel(i) : nullptr;
          for (std::size_t v = 0; v < l; ++v) {
            const std::int64_t* nbp = nbr.data() + v * Conv3d::kTaps;
            const double gv = gp[v];
            if (gv != 0.0) {
              for (int t = 0; t < Conv3d::kTaps; ++t) gw[t] += gv * ip[nbp[t]];
            }
          }
          if (gi) {
            // voxel u feeds output voxel v under tap t exactly when v is u's
            // neighbor under the mirrored tap 26-t
            for (std::size_t u = 0; u < l; ++u) {
              const std::int64_t* nbp = nbr.data() + u * Conv3d::kTaps;
              double acc = 0.0;
              for (int t = 0; t < Conv3d::kTaps; ++t) {
                acc += wp[t] * gp[nbp[Conv3d::kTaps - 1 - t]];
              }
              gi[u] += acc;
            }
          }
        }
      }
    }
  };

  // d(loss)/d(pred)
  std::vector<FeatureMap> g(ns);
  for (int s = 0; s < ns; ++s) {
    g[s] = FeatureMap(1, nb, np, nq);
    const double* p = pred[s].channel(0);
    double* gp = g[s].channel(0);
    for (std::size_t v = 0; v < l; ++v) {
      const double target = batch[s].noisy.data()[v] - batch[s].clean.data()[v];
      const double d = p[v] - target;
      gp[v] = d > 0.0 ? 1.0 / denom : (d < 0.0 ? -1.0 / denom : 0.0);
    }
  }

  std::vector<FeatureMap> gprev;
  conv_backward(conv_out, g_conv_out, stages[w.num_blocks + 1], g, &gprev);
  g = std::move(gprev);

  for (int k = w.num_blocks - 1; k >= 0; --k) {
    const int c = w.channels;
    BatchNorm3d& g_bn = std::get<BatchNorm3d>(out.grads.layers[2 + 2 * k]);
    Conv3d& g_conv = std::get<Conv3d>(out.grads.layers[1 + 2 * k]);
    const double m = static_cast<double>(ns) * static_cast<double>(l);
    // ReLU mask from the block output, then batch-norm backward
    for (int s = 0; s < ns; ++s) {
      for (int ch = 0; ch < c; ++ch) {
        const double* yp = stages[k + 2][s].channel(ch);
        double* gp = g[s].channel(ch);
        for (std::size_t v = 0; v < l; ++v) {
          if (yp[v] <= 0.0) gp[v] = 0.0;
        }
      }
    }
    std::vector<FeatureMap> gz(ns);
    for (int s = 0; s < ns; ++s) gz[s] = FeatureMap(c, nb, np, nq);
    for (int ch = 0; ch < c; ++ch) {
      double s1 = 0.0, s2 = 0.0;
      for (int s = 0; s < ns; ++s) {
        const double* gp = g[s].channel(ch);
        const double* xp = xhat[k][s].channel(ch);
        for (std::size_t v = 0; v < l; ++v) {
          s1 += gp[v];
          s2 += gp[v] * xp[v];
        }
      }
      g_bn.shift[ch] += s1;
      g_bn.scale[ch] += s2;
      const double ga = block_bns[k]->scale[ch] * invstd[k][ch];
      const double mean_g = s1 / m, mean_gx = s2 / m;
      for (int s = 0; s < ns; ++s) {
        const double* gp = g[s].channel(ch);
        const double* xp = xhat[k][s].channel(ch);
        double* zp = gz[s].channel(ch);
        for (std::size_t v = 0; v < l; ++v) {
          zp[v] = ga * (gp[v] - mean_g - xp[v] * mean_gx);
        }
      }
    }
    conv_backward(*block_convs[k], g_conv, stages[k + 1], gz, &gprev);
    g = std::move(gprev);
  }

  // first ReLU, then the input convolution (no input gradient needed)
  for (int s = 0; s < ns; ++s) {
    for (int ch = 0; ch < w.channels; ++ch) {
      const double* rp = stages[1][s].channel(ch);
      double* gp = g[s].channel(ch);
      for (std::size_t v = 0; v < l; ++v) {
        if (rp[v] <= 0.0) gp[v] = 0.0;
      }
    }
  }
  conv_backward(conv_in, g_conv_in, stages[0], g, nullptr);
  return out;
}

}  // namespace detail

// Training-mode L1 loss of one mini-batch (batch-statistics normalization).
inline double training_loss(const B3ddnWeights& w, const std::vector<BatchSample>& batch) {
  return detail::batch_loss_and_gradients(w, batch, false).loss;
}

// Analytic gradients of training_loss with respect to every trainable
// parameter, in trainable_parameters() order.
inline std::vector<double> training_loss_gradients(const B3ddnWeights& w,
                                                   const std::vector<BatchSample>& batch) {
  auto lg = detail::batch_loss_and_gradients(w, batch, true);
  std::vector<double> flat;
  auto refs = trainable_parameters(lg.grads);
  flat.reserve(refs.size());
  for (double* p : refs) flat.push_back(*p);
  return flat;
}

struct TrainResult {
  B3ddnWeights weights;
  std::vector<double> loss_curve;  // one entry per optimizer step
};

// Mean of the trailing `window` entries (the whole curve if shorter).
inline double smoothed_loss(const std::vector<double>& curve, std::size_t window) {
  if (curve.empty()) throw data_error("empty loss curve");
  const std::size_t n = std::min(window, curve.size());
  double s = 0.0;
  for (std::size_t i = curve.size() - n; i < curve.size(); ++i) s += curve[i];
  return s / static_cast<double>(n);
}

namespace detail {

inline HsiCube crop_patch(const HsiCube& cube, int b0, int i0, int j0, int size) {
  HsiCube out(size, size, size);
  for (int b = 0; b < size; ++b) {
    for (int i = 0; i < size; ++i) {
      for (int j = 0; j < size; ++j) {
        out(b, i, j) = cube(b0 + b, i0 + i, j0 + j);
      }
    }
  }
  return out;
}

// The 8 spatial dihedral transforms: d%4 quarter-turns plus a flip for d >= 4.
inline HsiCube dihedral(const HsiCube& cube, int d) {
  HsiCube out = cube;
  const int rot = d % 4;
  for (int r = 0; r < rot; ++r) {
    HsiCube tmp(out.bands(), out.cols(), out.rows());
    for (int b = 0; b < out.bands(); ++b) {
      for (int i = 0; i < out.rows(); ++i) {
        for (int j = 0; j < out.cols(); ++j) {
          tmp(b, j, out.rows() - 1 - i) = out(b, i, j);
        }
      }
    }
    out = std::move(tmp);
  }
  if (d >= 4) {
    HsiCube tmp = out;
    for (int b = 0; b < out.bands(); ++b) {
      for (int i = 0; i < out.rows(); ++i) {
        for (int j = 0; j < out.cols(); ++j) {
          tmp(b, i, out.cols() - 1 - j) = out(b, i, j);
        }
      }
    }
    out = std::move(tmp);
  }
  return out;
}

}  // namespace detail

// Train a residual-predicting denoiser on noisy/clean patch pairs drawn from
// `dataset`. Each epoch visits the eligible cubes in a fresh random order;
// every sample is a random cubic crop, corrupted with Gaussian noise of a
// level drawn from opts' noise range, then randomly rotated/flipped. Adam with
// the configured learning rate minimizes the mean L1 residual-prediction
// error. Single-threaded and bitwise deterministic in opts.seed.
inline TrainResult train_b3ddn(const std::vector<HsiCube>& dataset, const TrainOptions& opts,
                               int channels = 8, int num_blocks = 2) {
  opts.validate();
  std::vector<int> eligible;
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    if (dataset[i].bands() >= opts.patch_size && dataset[i].rows() >= opts.patch_size &&
        dataset[i].cols() >= opts.patch_size) {
      eligible.push_back(static_cast<int>(i));
    }
  }
  if (eligible.empty()) throw data_error("no training cube fits the patch size");

  Rng rng(opts.seed);
  TrainResult res;
  res.weights = make_b3ddn(num_blocks, channels, rng.next_u64());
  B3ddnWeights mom1 = zeros_like(res.weights);
  B3ddnWeights mom2 = zeros_like(res.weights);
  const auto params = trainable_parameters(res.weights);
  const auto m1 = trainable_parameters(mom1);
  const auto m2 = trainable_parameters(mom2);

  constexpr double kBeta1 = 0.9, kBeta2 = 0.999, kAdamEps = 1e-8;
  constexpr double kBnMomentum = 0.1;
  const int steps_per_epoch =
      (static_cast<int>(eligible.size()) + opts.batch_size - 1) / opts.batch_size;
  long t = 0;

  for (int epoch = 0; epoch < opts.epochs; ++epoch) {
    std::vector<int> order = eligible;
    for (int i = static_cast<int>(order.size()) - 1; i > 0; --i) {
      std::swap(order[i], order[rng.uniform_int(i + 1)]);
    }
    for (int step = 0; step < steps_per_epoch; ++step) {
      std::vector<BatchSample> batch;
      batch.reserve(opts.batch_size);
      for (int s = 0; s < opts.batch_size; ++s) {
        const HsiCube& cube =
            dataset[order[(static_cast<std::size_t>(step) * opts.batch_size + s) % order.size()]];
        const int b0 = rng.uniform_int(cube.bands() - opts.patch_size + 1);
        const int i0 = rng.uniform_int(cube.rows() - opts.patch_size + 1);
        const int j0 = rng.uniform_int(cube.cols() - opts.patch_size + 1);
        HsiCube clean = detail::crop_patch(cube, b0, i0, j0, opts.patch_size);
        const double sigma = rng.uniform(opts.noise_lo, opts.noise_hi);
        HsiCube noisy = clean;
        for (double& v : noisy.data()) v += sigma * rng.gaussian();
        const int d = rng.uniform_int(8);
        batch.push_back({detail::dihedral(noisy, d), detail::dihedral(clean, d)});
      }

      auto lg = detail::batch_loss_and_gradients(res.weights, batch, true);
      res.loss_curve.push_back(lg.loss);
      ++t;
      const auto grads = trainable_parameters(lg.grads);
      const double bc1 = 1.0 - std::pow(kBeta1, static_cast<double>(t));
      const double bc2 = 1.0 - std::pow(kBeta2, static_cast<double>(t));
      for (std::size_t p = 0; p < params.size(); ++p) {
        const double gr = *grads[p];
        *m1[p] = kBeta1 * *m1[p] + (1.0 - kBeta1) * gr;
        *m2[p] = kBeta2 * *m2[p] + (1.0 - kBeta2) * gr * gr;
        *params[p] -= opts.learning_rate * (*m1[p] / bc1) / (std::sqrt(*m2[p] / bc2) + kAdamEps);
      }
      // refresh running statistics from this batch
      for (int k = 0; k < res.weights.num_blocks; ++k) {
        auto& bn = std::get<BatchNorm3d>(res.weights.layers[2 + 2 * k]);
        for (int ch = 0; ch < bn.channels; ++ch) {
          bn.running_mean[ch] =
              (1.0 - kBnMomentum) * bn.running_mean[ch] + kBnMomentum * lg.bn_stats[k].mean[ch];
          bn.running_var[ch] =
              (1.0 - kBnMomentum) * bn.running_var[ch] + kBnMomentum * lg.bn_stats[k].var[ch];
        }
      }
    }
  }
  return res;
}

}  // namespace hsideconv

#pragma once

#include <bit>
#include <cstdint>
#include <fstream>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "hsideconv/b3ddn.hpp"
#include "hsideconv/cube.hpp"
#include "hsideconv/degradation.hpp"
#include "hsideconv/errors.hpp"
#include "hsideconv/format.hpp"
#include "hsideconv/kernel.hpp"
#include "hsideconv/solver.hpp"
#include "hsideconv/train.hpp"

namespace hsideconv {

enum class CubeDtype : std::uint32_t { f32 = 0, f64 = 1 };

namespace detail {

// All formats are little-endian regardless of host order.
inline void put_u32(std::string& out, std::uint32_t v) {
  out.push_back(static_cast<char>(v & 0xff));
  out.push_back(static_cast<char>((v >> 8) & 0xff));
  out.push_back(static_cast<char>((v >> 16) & 0xff));
  out.push_back(static_cast<char>((v >> 24) & 0xff));
}

inline void put_u64(std::string& out, std::uint64_t v) {
  put_u32(out, static_cast<std::uint32_t>(v & 0xffffffffu));
  put_u32(out, static_cast<std::uint32_t>(v >> 32));
}

inline void put_f64(std::string& out, double v) { put_u64(out, std::bit_cast<std::uint64_t>(v)); }

inline void put_f32(std::string& out, float v) { put_u32(out, std::bit_cast<std::uint32_t>(v)); }

// Sequential reader that reports the byte offset of any failure.
class ByteReader {
 public:
  explicit ByteReader(std::string_view buf) : buf_(buf) {}

  std::size_t offset() const { return at_; }
  std::size_t remaining() const { return buf_.size() - at_; }

  void expect_magic(std::string_view magic, std::string_view what) {
    if (remaining() < magic.size() ||
        buf_.substr(at_, magic.size()) != magic) {
      throw format_error(std::string(what) + ": bad magic", at_);
    }
    at_ += magic.size();
  }

  std::uint32_t u32(std::string_view what) {
    if (remaining() < 4) throw format_error(std::string(what) + ": truncated", at_);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) {
      v |= static_cast<std::uint32_t>(static_cast<unsigned char>(buf_[at_ + i])) << (8 * i);
    }
    at_ += 4;
    return v;
  }

  double f64(std::string_view what) {
    if (remaining() < 8) throw format_error(std::string(what) + ": truncated", at_);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) {
      v |= static_cast<std::uint64_t>(static_cast<unsigned char>(buf_[at_ + i])) << (8 * i);
    }
    at_ += 8;
    return std::bit_cast<double>(v);
  }

  float f32(std::string_view what) {
    const std::uint32_t v = u32(what);
    return std::bit_cast<float>(v);
  }

  void expect_end(std::string_view what) {
    if (remaining() != 0) throw format_error(std::string(what) + ": trailing bytes", at_);
  }

 private:
  std::string_view buf_;
  std::size_t at_ = 0;
};

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw error("cannot open '" + path + "' for reading");
  std::string buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return buf;
}

inline void write_file(const std::string& path, std::string_view buf) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw error("cannot open '" + path + "' for writing");
  out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  if (!out) throw error("failed writing '" + path + "'");
}

}  // namespace detail

// ---- cube files: "HSC1", u32 bands/rows/cols/dtype, raw samples ----

inline std::string encode_cube(const HsiCube& cube, CubeDtype dtype = CubeDtype::f64) {
  std::string out;
  out += "HSC1";
  detail::put_u32(out, static_cast<std::uint32_t>(cube.bands()));
  detail::put_u32(out, static_cast<std::uint32_t>(cube.rows()));
  detail::put_u32(out, static_cast<std::uint32_t>(cube.cols()));
  detail::put_u32(out, static_cast<std::uint32_t>(dtype));
  for (double v : cube.data()) {
    if (dtype == CubeDtype::f64) {
      detail::put_f64(out, v);
    } else {
      detail::put_f32(out, static_cast<float>(v));
    }
  }
  return out;
}

inline HsiCube decode_cube(std::string_view buf) {
  detail::ByteReader r(buf);
  r.expect_magic("HSC1", "cube file");
  const std::uint32_t n = r.u32("cube header");
  const std::uint32_t p = r.u32("cube header");
  const std::uint32_t q = r.u32("cube header");
  const std::uint32_t dtype = r.u32("cube header");
  if (n < 1 || p < 1 || q < 1) throw format_error("cube file: zero dimension", r.offset());
  if (dtype > 1) throw format_error("cube file: unknown dtype", r.offset());
  const std::uint64_t voxels = static_cast<std::uint64_t>(n) * p * q;
  const std::uint64_t sample = dtype == 1 ? 8 : 4;
  if (voxels > (std::size_t{1} << 40) || r.remaining() != voxels * sample) {
    throw format_error("cube file: truncated", r.offset());
  }
  HsiCube cube(static_cast<int>(n), static_cast<int>(p), static_cast<int>(q));
  for (std::uint64_t i = 0; i < voxels; ++i) {
    cube.data()[i] = dtype == 1 ? r.f64("cube payload")
                                : static_cast<double>(r.f32("cube payload"));
  }
  return cube;
}

inline void write_cube(const HsiCube& cube, const std::string& path,
                       CubeDtype dtype = CubeDtype::f64) {
  detail::write_file(path, encode_cube(cube, dtype));
}

inline HsiCube read_cube(const std::string& path) { return decode_cube(detail::read_file(path)); }

// ---- kernel files: "PSF1", u32 band_count/kh/kw, f64 taps ----

inline std::string encode_kernel(const KernelStack& k) {
  std::string out;
  out += "PSF1";
  detail::put_u32(out, static_cast<std::uint32_t>(k.bands()));
  detail::put_u32(out, static_cast<std::uint32_t>(k.kh()));
  detail::put_u32(out, static_cast<std::uint32_t>(k.kw()));
  for (double t : k.taps()) detail::put_f64(out, t);
  return out;
}

inline KernelStack decode_kernel(std::string_view buf) {
  detail::ByteReader r(buf);
  r.expect_magic("PSF1", "kernel file");
  const std::uint32_t bands = r.u32("kernel header");
  const std::uint32_t kh = r.u32("kernel header");
  const std::uint32_t kw = r.u32("kernel header");
  if (bands < 1) throw format_error("kernel file: zero band count", r.offset());
  if (kh % 2 == 0 || kw % 2 == 0 || kh == 0 || kw == 0) {
    throw format_error("kernel file: extents must be odd", r.offset());
  }
  const std::uint64_t taps = static_cast<std::uint64_t>(bands) * kh * kw;
  if (taps > (std::size_t{1} << 32) || r.remaining() != taps * 8) {
    throw format_error("kernel file: truncated", r.offset());
  }
  std::vector<double> values(taps);
  for (std::uint64_t i = 0; i < taps; ++i) values[i] = r.f64("kernel payload");
  return KernelStack(static_cast<int>(bands), static_cast<int>(kh), static_cast<int>(kw),
                     std::move(values));
}

inline void write_kernel(const KernelStack& k, const std::string& path) {
  detail::write_file(path, encode_kernel(k));
}

inline KernelStack read_kernel(const std::string& path) {
  return decode_kernel(detail::read_file(path));
}

// ---- weights files: "B3W1", u32 version/blocks/channels, tagged layers ----

inline constexpr std::uint32_t kWeightsVersion = 1;
inline constexpr std::uint32_t kLayerTagConv = 0;
inline constexpr std::uint32_t kLayerTagBatchNorm = 1;

inline std::string encode_weights(const B3ddnWeights& w) {
  w.validate();
  std::string out;
  out += "B3W1";
  detail::put_u32(out, kWeightsVersion);
  detail::put_u32(out, static_cast<std::uint32_t>(w.num_blocks));
  detail::put_u32(out, static_cast<std::uint32_t>(w.channels));
  for (const auto& layer : w.layers) {
    if (const auto* conv = std::get_if<Conv3d>(&layer)) {
      detail::put_u32(out, kLayerTagConv);
      detail::put_u32(out, static_cast<std::uint32_t>(conv->in_channels));
      detail::put_u32(out, static_cast<std::uint32_t>(conv->out_channels));
      for (double v : conv->weights) detail::put_f64(out, v);
      for (double v : conv->bias) detail::put_f64(out, v);
    } else {
      const auto& bn = std::get<BatchNorm3d>(layer);
      detail::put_u32(out, kLayerTagBatchNorm);
      detail::put_u32(out, static_cast<std::uint32_t>(bn.channels));
      detail::put_u32(out, static_cast<std::uint32_t>(bn.channels));
      for (double v : bn.scale) detail::put_f64(out, v);
      for (double v : bn.shift) detail::put_f64(out, v);
      for (double v : bn.running_mean) detail::put_f64(out, v);
      for (double v : bn.running_var) detail::put_f64(out, v);
      detail::put_f64(out, bn.epsilon);
    }
  }
  return out;
}

inline B3ddnWeights decode_weights(std::string_view buf) {
  detail::ByteReader r(buf);
  r.expect_magic("B3W1", "weights file");
  const std::uint32_t version = r.u32("weights header");
  if (version != kWeightsVersion) throw format_error("weights file: unsupported version", r.offset());
  const std::uint32_t blocks = r.u32("weights header");
  const std::uint32_t channels = r.u32("weights header");
  if (blocks > 1024 || channels < 1 || channels > 65536) {
    throw format_error("weights file: implausible topology", r.offset());
  }
  B3ddnWeights w;
  w.num_blocks = static_cast<int>(blocks);
  w.channels = static_cast<int>(channels);
  const std::size_t layer_count = 2 + 2 * static_cast<std::size_t>(blocks);
  for (std::size_t idx = 0; idx < layer_count; ++idx) {
    const std::uint32_t tag = r.u32("layer tag");
    const std::uint32_t in_c = r.u32("layer channels");
    const std::uint32_t out_c = r.u32("layer channels");
    if (in_c < 1 || out_c < 1 || in_c > 65536 || out_c > 65536) {
      throw format_error("weights file: implausible layer channels", r.offset());
    }
    if (tag == kLayerTagConv) {
      Conv3d conv(static_cast<int>(in_c), static_cast<int>(out_c));
      for (double& v : conv.weights) v = r.f64("conv taps");
      for (double& v : conv.bias) v = r.f64("conv biases");
      w.layers.push_back(std::move(conv));
    } else if (tag == kLayerTagBatchNorm) {
      if (in_c != out_c) throw format_error("weights file: batch-norm channel mismatch", r.offset());
      BatchNorm3d bn(static_cast<int>(in_c));
      for (double& v : bn.scale) v = r.f64("bn scale");
      for (double& v : bn.shift) v = r.f64("bn shift");
      for (double& v : bn.running_mean) v = r.f64("bn running mean");
      for (double& v : bn.running_var) v = r.f64("bn running variance");
      bn.epsilon = r.f64("bn epsilon");
      w.layers.push_back(std::move(bn));
    } else {
      throw format_error("weights file: unknown layer tag", r.offset());
    }
  }
  r.expect_end("weights file");
  try {
    w.validate();
  } catch (const weights_error& e) {
    throw weights_error(std::string("weights file: ") + e.what());
  }
  return w;
}

inline void write_weights(const B3ddnWeights& w, const std::string& path) {
  detail::write_file(path, encode_weights(w));
}

inline B3ddnWeights read_weights(const std::string& path) {
  return decode_weights(detail::read_file(path));
}

// ---- run configuration: flat "key = value" text ----

struct RunConfig {
  SolverOptions solver;
  NoiseSpec noise;
  KernelSpec kernel;
  TrainOptions train;
};

namespace detail {

inline std::string kernel_kind_name(KernelKind k) {
  switch (k) {
    case KernelKind::gaussian: return "gaussian";
    case KernelKind::circle: return "circle";
    case KernelKind::motion: return "motion";
    case KernelKind::square: return "square";
  }
  throw spec_error("unknown kernel kind");
}

inline KernelKind kernel_kind_from(std::string_view s) {
  if (s == "gaussian") return KernelKind::gaussian;
  if (s == "circle") return KernelKind::circle;
  if (s == "motion") return KernelKind::motion;
  if (s == "square") return KernelKind::square;
  throw spec_error("unknown kernel kind '" + std::string(s) + "'");
}

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

}  // namespace detail

inline std::string print_config(const RunConfig& c) {
  std::string out;
  auto kv = [&out](std::string_view key, const std::string& value) {
    out += key;
    out += " = ";
    out += value;
    out += '\n';
  };
  kv("solver.bracket_a", fmt_double(c.solver.bracket_a));
  kv("solver.bracket_b", fmt_double(c.solver.bracket_b));
  kv("solver.epsilon", fmt_double(c.solver.epsilon));
  kv("solver.zeta", fmt_double(c.solver.zeta));
  kv("solver.max_iters", fmt_u64(static_cast<std::uint64_t>(c.solver.max_iters)));
  kv("solver.init", c.solver.init == SolverOptions::Init::zero ? "zero" : "observation");
  kv("noise.sigma", fmt_double(c.noise.sigma));
  kv("noise.seed", fmt_u64(c.noise.seed));
  kv("kernel.kind", detail::kernel_kind_name(c.kernel.kind));
  kv("kernel.size", fmt_u64(static_cast<std::uint64_t>(c.kernel.size)));
  kv("kernel.bandwidth", fmt_double(c.kernel.bandwidth));
  kv("kernel.diameter", fmt_u64(static_cast<std::uint64_t>(c.kernel.diameter)));
  kv("kernel.angle_deg", fmt_double(c.kernel.angle_deg));
  kv("kernel.length", fmt_double(c.kernel.length));
  kv("kernel.side", fmt_u64(static_cast<std::uint64_t>(c.kernel.side)));
  kv("train.learning_rate", fmt_double(c.train.learning_rate));
  kv("train.batch_size", fmt_u64(static_cast<std::uint64_t>(c.train.batch_size)));
  kv("train.epochs", fmt_u64(static_cast<std::uint64_t>(c.train.epochs)));
  kv("train.patch_size", fmt_u64(static_cast<std::uint64_t>(c.train.patch_size)));
  kv("train.noise_lo", fmt_double(c.train.noise_lo));
  kv("train.noise_hi", fmt_double(c.train.noise_hi));
  kv("train.seed", fmt_u64(c.train.seed));
  return out;
}

// Parse a flat key=value document. Unknown keys are rejected; '#' starts a
// comment line. parse -> print -> parse is the identity.
inline RunConfig parse_config(std::string_view text) {
  RunConfig c;
  std::size_t line_start = 0;
  while (line_start <= text.size()) {
    const std::size_t eol = std::min(text.find('\n', line_start), text.size());
    std::string_view line = detail::trim(text.substr(line_start, eol - line_start));
    const std::size_t offset = line_start;
    line_start = eol + 1;
    if (line.empty() || line.front() == '#') {
      if (eol == text.size()) break;
      continue;
    }
    const std::size_t eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw format_error("config: expected 'key = value'", offset);
    }
    const std::string key(detail::trim(line.substr(0, eq)));
    const std::string value(detail::trim(line.substr(eq + 1)));
    try {
      if (key == "solver.bracket_a") c.solver.bracket_a = parse_double(value);
      else if (key == "solver.bracket_b") c.solver.bracket_b = parse_double(value);
      else if (key == "solver.epsilon") c.solver.epsilon = parse_double(value);
      else if (key == "solver.zeta") c.solver.zeta = parse_double(value);
      else if (key == "solver.max_iters") c.solver.max_iters = parse_int(value);
      else if (key == "solver.init") {
        if (value == "observation") c.solver.init = SolverOptions::Init::observation;
        else if (value == "zero") c.solver.init = SolverOptions::Init::zero;
        else throw spec_error("unknown init mode '" + value + "'");
      }
      else if (key == "noise.sigma") c.noise.sigma = parse_double(value);
      else if (key == "noise.seed") c.noise.seed = parse_u64(value);
      else if (key == "kernel.kind") c.kernel.kind = detail::kernel_kind_from(value);
      else if (key == "kernel.size") c.kernel.size = parse_int(value);
      else if (key == "kernel.bandwidth") c.kernel.bandwidth = parse_double(value);
      else if (key == "kernel.diameter") c.kernel.diameter = parse_int(value);
      else if (key == "kernel.angle_deg") c.kernel.angle_deg = parse_double(value);
      else if (key == "kernel.length") c.kernel.length = parse_double(value);
      else if (key == "kernel.side") c.kernel.side = parse_int(value);
      else if (key == "train.learning_rate") c.train.learning_rate = parse_double(value);
      else if (key == "train.batch_size") c.train.batch_size = parse_int(value);
      else if (key == "train.epochs") c.train.epochs = parse_int(value);
      else if (key == "train.patch_size") c.train.patch_size = parse_int(value);
      else if (key == "train.noise_lo") c.train.noise_lo = parse_double(value);
      else if (key == "train.noise_hi") c.train.noise_hi = parse_double(value);
      else if (key == "train.seed") c.train.seed = parse_u64(value);
      else throw format_error("config: unknown key '" + key + "'", offset);
    } catch (const spec_error& e) {
      throw format_error(std::string("config: ") + e.what(), offset);
    }
    if (eol == text.size()) break;
  }
  return c;
}

}  // namespace hsideconv

#pragma once

#include <array>
#include <cmath>
#include <iostream>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "hsideconv/b3ddn.hpp"
#include "hsideconv/cube.hpp"
#include "hsideconv/degradation.hpp"
#include "hsideconv/denoiser.hpp"
#include "hsideconv/errors.hpp"
#include "hsideconv/format.hpp"
#include "hsideconv/io.hpp"
#include "hsideconv/kernel.hpp"
#include "hsideconv/metrics.hpp"
#include "hsideconv/solver.hpp"
#include "hsideconv/synthetic.hpp"
#include "hsideconv/train.hpp"

namespace hsideconv {

namespace detail {

inline std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> parts;
  std::size_t at = 0;
  while (true) {
    const std::size_t next = s.find(sep, at);
    parts.push_back(s.substr(at, next - at));
    if (next == std::string::npos) break;
    at = next + 1;
  }
  return parts;
}

// Kernel spec strings: gaussian:SIZE:BANDWIDTH, circle:SIZE:DIAMETER,
// square:SIZE:SIDE, motion:SIZE:ANGLE_DEG:LENGTH.
inline KernelSpec parse_kernel_spec_string(const std::string& s) {
  const auto parts = split(s, ':');
  if (parts.size() < 2) throw spec_error("kernel spec needs at least kind:size");
  KernelSpec spec;
  spec.kind = kernel_kind_from(parts[0]);
  spec.size = parse_int(parts[1]);
  switch (spec.kind) {
    case KernelKind::gaussian:
      if (parts.size() != 3) throw spec_error("gaussian spec is gaussian:SIZE:BANDWIDTH");
      spec.bandwidth = parse_double(parts[2]);
      break;
    case KernelKind::circle:
      if (parts.size() != 3) throw spec_error("circle spec is circle:SIZE:DIAMETER");
      spec.diameter = parse_int(parts[2]);
      break;
    case KernelKind::square:
      if (parts.size() != 3) throw spec_error("square spec is square:SIZE:SIDE");
      spec.side = parse_int(parts[2]);
      break;
    case KernelKind::motion:
      if (parts.size() != 4) throw spec_error("motion spec is motion:SIZE:ANGLE_DEG:LENGTH");
      spec.angle_deg = parse_double(parts[2]);
      spec.length = parse_double(parts[3]);
      break;
  }
  return spec;
}

struct BenchScenario {
  std::string name;
  KernelSpec kernel;
  double sigma;
};

// The six benchmark degradations; the motion kernel is this library's
// parametric stand-in for the external one.
inline std::vector<BenchScenario> benchmark_scenarios() {
  return {
      {"a", {KernelKind::gaussian, 9, 2.0, 0, 0.0, 0.0, 0}, 0.01},
      {"b", {KernelKind::gaussian, 13, 3.0, 0, 0.0, 0.0, 0}, 0.01},
      {"c", {KernelKind::gaussian, 9, 2.0, 0, 0.0, 0.0, 0}, 0.03},
      {"d", {KernelKind::circle, 9, 0.0, 7, 0.0, 0.0, 0}, 0.01},
      {"e", {KernelKind::motion, 13, 0.0, 0, 45.0, 9.0, 0}, 0.01},
      {"f", {KernelKind::square, 5, 0.0, 0, 0.0, 0.0, 5}, 0.01},
  };
}

inline double sample_mean(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

inline double sample_std(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  const double m = sample_mean(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return std::sqrt(s / static_cast<double>(v.size() - 1));
}

}  // namespace detail

// Drives the full pipeline from the command line; returns the process exit
// status. `args` excludes the program name.
inline int run_cli(const std::vector<std::string>& args, std::ostream& out = std::cout,
                   std::ostream& err = std::cerr) {
  CLI::App app{"Tuning-free hyperspectral image deconvolution"};
  app.require_subcommand(1);

  std::string input, output, kernel_path, kernel_spec, weights_path, config_path;
  std::string trace_path, ref_path, test_path, bracket;
  double sigma = 0.0, strength = 1.0;
  std::uint64_t seed = 0;
  std::optional<int> max_iters;
  std::optional<double> zeta, epsilon;

  auto* mk = app.add_subcommand("make-kernel", "Generate a parametric blur kernel file");
  mk->add_option("--kernel-spec", kernel_spec)->required();
  mk->add_option("--output", output)->required();

  auto* dg = app.add_subcommand("degrade", "Blur a cube and add Gaussian noise");
  dg->add_option("--input", input)->required();
  dg->add_option("--kernel", kernel_path);
  dg->add_option("--kernel-spec", kernel_spec);
  dg->add_option("--sigma", sigma);
  dg->add_option("--seed", seed);
  dg->add_option("--output", output)->required();

  auto* dc = app.add_subcommand("deconvolve", "Tuning-free deconvolution of a degraded cube");
  dc->add_option("--input", input)->required();
  dc->add_option("--kernel", kernel_path);
  dc->add_option("--kernel-spec", kernel_spec);
  dc->add_option("--weights", weights_path);
  dc->add_option("--strength", strength);
  dc->add_option("--output", output)->required();
  dc->add_option("--trace", trace_path);
  dc->add_option("--max-iters", max_iters);
  dc->add_option("--zeta", zeta);
  dc->add_option("--epsilon", epsilon);
  dc->add_option("--bracket", bracket);

  auto* dn = app.add_subcommand("denoise", "Apply the denoising prior once");
  dn->add_option("--input", input)->required();
  dn->add_option("--weights", weights_path);
  dn->add_option("--strength", strength);
  dn->add_option("--output", output)->required();

  auto* tr = app.add_subcommand("train", "Train the denoising network on synthetic cubes");
  tr->add_option("--config", config_path)->required();
  tr->add_option("--output", output)->required();
  tr->add_option("--trace", trace_path);

  auto* mt = app.add_subcommand("metrics", "Print rmse,psnr,ssim,ergas for a cube pair");
  mt->add_option("--ref", ref_path)->required();
  mt->add_option("--test", test_path)->required();

  auto* bm = app.add_subcommand("benchmark", "Run the scenario grid and write a results table");
  bm->add_option("--config", config_path)->required();
  bm->add_option("--weights", weights_path);
  bm->add_option("--strength", strength);
  bm->add_option("--output", output)->required();

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {  // --help
      out << app.help();
      return 0;
    }
    err << "error: " << e.what() << '\n';
    return e.get_exit_code();
  }

  auto load_kernel = [&]() -> KernelStack {
    if (!kernel_path.empty() && !kernel_spec.empty()) {
      throw spec_error("give either --kernel or --kernel-spec, not both");
    }
    if (!kernel_path.empty()) return read_kernel(kernel_path);
    if (!kernel_spec.empty()) return make_kernel(detail::parse_kernel_spec_string(kernel_spec));
    throw spec_error("a kernel is required (--kernel or --kernel-spec)");
  };

  auto solver_options = [&](const SolverOptions& base) {
    SolverOptions opts = base;
    if (max_iters) opts.max_iters = *max_iters;
    if (zeta) opts.zeta = *zeta;
    if (epsilon) opts.epsilon = *epsilon;
    if (!bracket.empty()) {
      const auto parts = detail::split(bracket, ':');
      if (parts.size() != 2) throw spec_error("--bracket expects A:B");
      opts.bracket_a = parse_double(parts[0]);
      opts.bracket_b = parse_double(parts[1]);
    }
    return opts;
  };

  auto pick_denoiser = [&]() -> Denoiser {
    if (!weights_path.empty()) return make_b3ddn_denoiser(read_weights(weights_path));
    return make_baseline_denoiser(strength);
  };

  try {
    if (app.got_subcommand(mk)) {
      write_kernel(make_kernel(detail::parse_kernel_spec_string(kernel_spec)), output);
    } else if (app.got_subcommand(dg)) {
      const HsiCube x = read_cube(input);
      write_cube(degrade(x, load_kernel(), {sigma, seed}), output);
    } else if (app.got_subcommand(dc)) {
      const HsiCube y = read_cube(input);
      const auto result = deconvolve(y, load_kernel(), pick_denoiser(), solver_options({}));
      write_cube(result.x_hat, output);
      if (!trace_path.empty()) detail::write_file(trace_path, trace_csv(result.trace));
    } else if (app.got_subcommand(dn)) {
      write_cube(pick_denoiser()(read_cube(input)), output);
    } else if (app.got_subcommand(tr)) {
      const RunConfig cfg = parse_config(detail::read_file(config_path));
      // Desk-scale corpus: 20 synthetic smooth cubes a bit larger than a patch.
      std::vector<HsiCube> dataset;
      const int extent = cfg.train.patch_size + 8;
      for (int i = 0; i < 20; ++i) {
        dataset.push_back(make_smooth_cube(extent, extent, extent, cfg.train.seed + 1000 + i));
      }
      const TrainResult res = train_b3ddn(dataset, cfg.train);
      write_weights(res.weights, output);
      if (!trace_path.empty()) {
        std::string csv = "step,loss\n";
        for (std::size_t i = 0; i < res.loss_curve.size(); ++i) {
          csv += fmt_u64(i) + "," + fmt_double(res.loss_curve[i]) + "\n";
        }
        detail::write_file(trace_path, csv);
      }
    } else if (app.got_subcommand(mt)) {
      const HsiCube ref = read_cube(ref_path);
      const HsiCube test = read_cube(test_path);
      out << metric_csv_row(compute_metrics(test, ref)) << '\n';
    } else if (app.got_subcommand(bm)) {
      const RunConfig cfg = parse_config(detail::read_file(config_path));
      constexpr int kTrials = 3;
      constexpr int kBands = 8, kRows = 32, kCols = 32;
      std::string csv =
          "scenario,method,trials,rmse_mean,rmse_std,psnr_mean,psnr_std,"
          "ssim_mean,ssim_std,ergas_mean,ergas_std\n";
      std::vector<std::string> methods = {"observed", "baseline"};
      std::optional<B3ddnWeights> bweights;
      if (!weights_path.empty()) {
        bweights = read_weights(weights_path);
        methods.push_back("b3ddn");
      }
      for (const auto& sc : detail::benchmark_scenarios()) {
        const KernelStack kern = make_kernel(sc.kernel);
        std::map<std::string, std::array<std::vector<double>, 4>> cells;
        for (int trial = 0; trial < kTrials; ++trial) {
          const std::uint64_t s = cfg.noise.seed + 17 * trial;
          const HsiCube x = make_smooth_cube(kBands, kRows, kCols, s);
          const HsiCube y = degrade(x, kern, {sc.sigma, s + 1});
          for (const auto& method : methods) {
            HsiCube x_hat = y;
            if (method == "baseline") {
              x_hat = deconvolve(y, kern, make_baseline_denoiser(strength), cfg.solver).x_hat;
            } else if (method == "b3ddn") {
              x_hat = deconvolve(y, kern, make_b3ddn_denoiser(*bweights), cfg.solver).x_hat;
            }
            const MetricReport m = compute_metrics(x_hat, x);
            auto& cell = cells[method];
            cell[0].push_back(m.rmse);
            cell[1].push_back(m.psnr);
            cell[2].push_back(m.ssim);
            cell[3].push_back(m.ergas);
          }
        }
        for (const auto& method : methods) {
          const auto& cell = cells[method];
          csv += sc.name + "," + method + "," + fmt_u64(kTrials);
          for (int i = 0; i < 4; ++i) {
            csv += "," + fmt_double(detail::sample_mean(cell[i])) + "," +
                   fmt_double(detail::sample_std(cell[i]));
          }
          csv += '\n';
        }
      }
      detail::write_file(output, csv);
    }
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}

}  // namespace hsideconv

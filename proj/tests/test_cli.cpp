#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "hsideconv/cli.hpp"
#include "hsideconv/io.hpp"
#include "hsideconv/synthetic.hpp"
#include "oracles.hpp"

namespace fs = std::filesystem;
using hsideconv::HsiCube;
using hsideconv::run_cli;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() /
           ("hsideconv_test_" + std::to_string(
                                    std::chrono::steady_clock::now().time_since_epoch().count()));
    fs::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path, ec);
  }
  std::string file(const std::string& name) const { return (path / name).string(); }
};

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in);
  return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

int run(const std::vector<std::string>& args, std::string* out_text = nullptr,
        std::string* err_text = nullptr) {
  std::ostringstream out, err;
  const int rc = run_cli(args, out, err);
  if (out_text) *out_text = out.str();
  if (err_text) *err_text = err.str();
  return rc;
}

// trace CSV minus its wall-clock column (timing is not reproducible)
std::string drop_elapsed_column(const std::string& csv) {
  std::string out;
  std::istringstream lines(csv);
  std::string line;
  while (std::getline(lines, line)) {
    out += line.substr(0, line.rfind(','));
    out += '\n';
  }
  return out;
}

}  // namespace

TEST_CASE("make-kernel writes a loadable kernel file", "[cli]") {
  TempDir dir;
  REQUIRE(run({"make-kernel", "--kernel-spec", "gaussian:9:2", "--output", dir.file("k.psf")}) == 0);
  const auto k = hsideconv::read_kernel(dir.file("k.psf"));
  REQUIRE(k.kh() == 9);
  double sum = 0.0;
  for (double t : k.taps()) sum += t;
  REQUIRE(sum == Catch::Approx(1.0).margin(1e-12));
}

TEST_CASE("degrade is byte-deterministic for a fixed seed", "[cli]") {
  TempDir dir;
  hsideconv::write_cube(hsideconv::make_smooth_cube(4, 16, 16, 800), dir.file("x.hsc"));
  for (const char* out : {"y1.hsc", "y2.hsc"}) {
    REQUIRE(run({"degrade", "--input", dir.file("x.hsc"), "--kernel-spec", "gaussian:9:2",
                 "--sigma", "0.01", "--seed", "7", "--output", dir.file(out)}) == 0);
  }
  REQUIRE(slurp(dir.file("y1.hsc")) == slurp(dir.file("y2.hsc")));
}

TEST_CASE("deconvolve writes an output cube and a whiteness trace", "[cli]") {
  TempDir dir;
  const HsiCube x = hsideconv::make_smooth_cube(4, 16, 16, 801);
  hsideconv::write_cube(x, dir.file("x.hsc"));
  REQUIRE(run({"degrade", "--input", dir.file("x.hsc"), "--kernel-spec", "gaussian:9:2",
               "--sigma", "0.01", "--seed", "3", "--output", dir.file("y.hsc")}) == 0);
  REQUIRE(run({"deconvolve", "--input", dir.file("y.hsc"), "--kernel-spec", "gaussian:9:2",
               "--strength", "2", "--output", dir.file("xhat.hsc"), "--trace",
               dir.file("trace.csv")}) == 0);

  const std::string trace = slurp(dir.file("trace.csv"));
  REQUIRE(trace.rfind("iteration,rho_star,whiteness,data_fidelity,elapsed_ms\n", 0) == 0);
  REQUIRE(std::count(trace.begin(), trace.end(), '\n') >= 3);

  // the final two whiteness values satisfy the stopping rule
  std::vector<double> whiteness;
  std::istringstream lines(trace);
  std::string line;
  std::getline(lines, line);  // header
  while (std::getline(lines, line)) {
    std::size_t a = line.find(',');
    a = line.find(',', a + 1);
    const std::size_t b = line.find(',', a + 1);
    whiteness.push_back(std::stod(line.substr(a + 1, b - a - 1)));
  }
  REQUIRE(whiteness.size() >= 2);
  REQUIRE(hsideconv::should_stop(whiteness[whiteness.size() - 2], whiteness.back(), 0.0002));

  const HsiCube xhat = hsideconv::read_cube(dir.file("xhat.hsc"));
  const HsiCube y = hsideconv::read_cube(dir.file("y.hsc"));
  REQUIRE(hsideconv::rmse(xhat, x) < hsideconv::rmse(y, x));
}

TEST_CASE("metrics prints the fixed-point CSV row for identical inputs", "[cli]") {
  TempDir dir;
  hsideconv::write_cube(hsideconv::make_smooth_cube(3, 8, 8, 802), dir.file("a.hsc"));
  std::string out;
  REQUIRE(run({"metrics", "--ref", dir.file("a.hsc"), "--test", dir.file("a.hsc")}, &out) == 0);
  REQUIRE(out == "0,100,1,0\n");
}

TEST_CASE("full pipeline reruns are byte-identical", "[cli]") {
  TempDir dir;
  hsideconv::write_cube(hsideconv::make_smooth_cube(4, 16, 16, 803), dir.file("x.hsc"));
  auto once = [&](const std::string& tag) {
    REQUIRE(run({"degrade", "--input", dir.file("x.hsc"), "--kernel-spec", "circle:9:7",
                 "--sigma", "0.01", "--seed", "11", "--output", dir.file("y" + tag)}) == 0);
    REQUIRE(run({"deconvolve", "--input", dir.file("y" + tag), "--kernel-spec", "circle:9:7",
                 "--strength", "1.5", "--max-iters", "6", "--output", dir.file("xh" + tag),
                 "--trace", dir.file("t" + tag)}) == 0);
    std::string metrics_row;
    REQUIRE(run({"metrics", "--ref", dir.file("x.hsc"), "--test", dir.file("xh" + tag)},
                &metrics_row) == 0);
    return metrics_row;
  };
  const std::string row1 = once("1");
  const std::string row2 = once("2");
  REQUIRE(slurp(dir.file("y1")) == slurp(dir.file("y2")));
  REQUIRE(slurp(dir.file("xh1")) == slurp(dir.file("xh2")));
  REQUIRE(drop_elapsed_column(slurp(dir.file("t1"))) ==
          drop_elapsed_column(slurp(dir.file("t2"))));
  REQUIRE(row1 == row2);
}

TEST_CASE("denoise applies the baseline prior once", "[cli]") {
  TempDir dir;
  HsiCube noisy = hsideconv::make_smooth_cube(3, 12, 12, 804);
  hsideconv::Rng rng(805);
  for (double& v : noisy.data()) v += 0.05 * rng.gaussian();
  hsideconv::write_cube(noisy, dir.file("n.hsc"));
  REQUIRE(run({"denoise", "--input", dir.file("n.hsc"), "--strength", "2",
               "--output", dir.file("d.hsc")}) == 0);
  const HsiCube d = hsideconv::read_cube(dir.file("d.hsc"));
  REQUIRE(d.frobenius_norm() < noisy.frobenius_norm());
}

TEST_CASE("train writes weights and a loss curve from a config", "[cli]") {
  TempDir dir;
  hsideconv::RunConfig cfg;
  cfg.train.batch_size = 2;
  cfg.train.epochs = 1;
  cfg.train.patch_size = 6;
  cfg.train.seed = 42;
  hsideconv::detail::write_file(dir.file("run.cfg"), hsideconv::print_config(cfg));
  REQUIRE(run({"train", "--config", dir.file("run.cfg"), "--output", dir.file("w.b3w"),
               "--trace", dir.file("loss.csv")}) == 0);
  const auto w = hsideconv::read_weights(dir.file("w.b3w"));
  REQUIRE(w.num_blocks == 2);
  REQUIRE(w.channels == 8);
  REQUIRE(slurp(dir.file("loss.csv")).rfind("step,loss\n", 0) == 0);
}

TEST_CASE("benchmark writes the scenario-grid table", "[cli]") {
  TempDir dir;
  hsideconv::RunConfig cfg;
  cfg.solver.max_iters = 2;
  cfg.noise.seed = 5;
  hsideconv::detail::write_file(dir.file("run.cfg"), hsideconv::print_config(cfg));
  REQUIRE(run({"benchmark", "--config", dir.file("run.cfg"), "--output",
               dir.file("results.csv")}) == 0);
  const std::string csv = slurp(dir.file("results.csv"));
  REQUIRE(csv.rfind("scenario,method,trials,rmse_mean,rmse_std,psnr_mean,psnr_std,"
                    "ssim_mean,ssim_std,ergas_mean,ergas_std\n", 0) == 0);
  // 6 scenarios x 2 methods plus the header
  REQUIRE(std::count(csv.begin(), csv.end(), '\n') == 1 + 6 * 2);
}

TEST_CASE("bad invocations exit nonzero with a one-line diagnostic", "[cli]") {
  TempDir dir;
  std::string err;
  REQUIRE(run({"frobnicate"}, nullptr, &err) != 0);
  REQUIRE_FALSE(err.empty());

  err.clear();
  REQUIRE(run({"metrics", "--ref", dir.file("missing.hsc"), "--test", dir.file("missing.hsc")},
              nullptr, &err) != 0);
  REQUIRE(err.rfind("error: ", 0) == 0);
  REQUIRE(std::count(err.begin(), err.end(), '\n') == 1);

  err.clear();
  REQUIRE(run({"deconvolve", "--input", dir.file("missing.hsc"), "--output", dir.file("o.hsc"),
               "--unknown-flag"}, nullptr, &err) != 0);

  // format errors surface the byte offset
  hsideconv::detail::write_file(dir.file("junk.hsc"), "not a cube");
  err.clear();
  REQUIRE(run({"metrics", "--ref", dir.file("junk.hsc"), "--test", dir.file("junk.hsc")},
              nullptr, &err) == 1);
  REQUIRE(err.find("bad magic") != std::string::npos);
}

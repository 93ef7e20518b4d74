// Times the direct and FFT paths of circular convolution and all-lag
// correlation over a range of lengths. Used to pick kDirectCrossover.
//
//   convkernel_bench [--series S] [--min-seconds X]

#include <CLI11.hpp>

#include <chrono>
#include <cstdio>
#include <string>
#include <vector>

#include "convkernel/circconv.hpp"
#include "convkernel/random.hpp"
#include "convkernel/simd/kernels.hpp"

using namespace convkernel;

namespace {

template <typename F>
double seconds_per_call(F&& f, double min_seconds) {
  using clock = std::chrono::steady_clock;
  std::size_t reps = 1;
  for (;;) {
    const auto t0 = clock::now();
    for (std::size_t i = 0; i < reps; ++i) f();
    const double dt = std::chrono::duration<double>(clock::now() - t0).count();
    if (dt >= min_seconds) return dt / static_cast<double>(reps);
    reps *= 2;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Direct vs FFT crossover benchmark"};
  std::size_t series = 1;
  double min_seconds = 0.05;
  app.add_option("--series", series, "Series per block")->capture_default_str();
  app.add_option("--min-seconds", min_seconds, "Minimum timing window per measurement")->capture_default_str();
  CLI11_PARSE(app, argc, argv);

  std::printf("isa: %s, series: %zu\n", std::string(simd::isa_name(simd::active_isa())).c_str(), series);
  std::printf("%6s %14s %14s %14s %14s\n", "T", "conv direct", "conv fft", "corr direct", "corr fft");
  Rng rng(1);
  volatile double sink = 0.0;
  for (std::size_t T : {8, 16, 24, 32, 48, 64, 96, 128, 192, 256, 512, 1024}) {
    std::vector<double> x(series * T), r(series * T), theta(T);
    for (double& v : x) v = rng.normal();
    for (double& v : r) v = rng.normal();
    for (double& v : theta) v = rng.normal();
    const SeriesBlock xb = as_series(x, T), rb = as_series(r, T);
    auto conv = [&](ConvPath p) {
      return seconds_per_call([&] { sink = sink + circ_conv(theta, std::span(x).first(T), p)[0]; }, min_seconds);
    };
    auto corr = [&](ConvPath p) {
      return seconds_per_call([&] { sink = sink + circ_corr_all_lags(xb, rb, p)[0]; }, min_seconds);
    };
    std::printf("%6zu %12.3fus %12.3fus %12.3fus %12.3fus\n", T, 1e6 * conv(ConvPath::direct),
                1e6 * conv(ConvPath::fft), 1e6 * corr(ConvPath::direct), 1e6 * corr(ConvPath::fft));
  }
  return 0;
}

#include <benchmark/benchmark.h>

#include <cmath>
#include <numbers>

#include "nsms/mixture.hpp"
#include "nsms/ms_field.hpp"
#include "nsms/ns_field.hpp"

using namespace nsms;

namespace {

constexpr double kPi = std::numbers::pi;

MixtureParams mixture(int n, double tau = 1e-3) {
  std::vector<double> m, d;
  for (int i = 0; i < n; ++i) m.push_back(1.0 + i);
  for (int i = 0; i < n * (n - 1) / 2; ++i) d.push_back(0.2 + 0.1 * i);
  return MixtureParams::from_upper_triangle(m, d, 0.0, tau);
}

SpeciesVector composition(int n) {
  SpeciesVector rho(n);
  for (int i = 0; i < n; ++i) rho(i) = (1.0 + i) / (n * (n + 1) / 2.0);
  return rho;
}

void BM_WToX(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const auto p = mixture(n);
  const SpeciesVector w = rho_to_w(composition(n), p);
  for (auto _ : state) benchmark::DoNotOptimize(w_to_x(w, p));
}
BENCHMARK(BM_WToX)->Arg(2)->Arg(3)->Arg(6)->Arg(12);

void BM_MatrixB(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const auto p = mixture(n);
  const SpeciesVector rho = composition(n);
  for (auto _ : state) benchmark::DoNotOptimize(matrix_B(rho, p));
}
BENCHMARK(BM_MatrixB)->Arg(2)->Arg(3)->Arg(6)->Arg(12);

void BM_MsStep1d(benchmark::State& state) {
  const int cells = static_cast<int>(state.range(0));
  const auto p = mixture(3);
  const Grid g = Grid::line(1.0, cells);
  Eigen::MatrixXd rho(3, cells);
  for (int k = 0; k < cells; ++k) {
    const double z = g.center(0, k);
    rho(0, k) = 0.3 + 0.1 * std::cos(kPi * z);
    rho(1, k) = 0.3 - 0.05 * std::cos(2 * kPi * z);
    rho(2, k) = 1.0 - rho(0, k) - rho(1, k);
  }
  const auto s = SpeciesFieldState::from_rho(rho, p);
  const auto u = VelocityField::zero(g);
  for (auto _ : state) benchmark::DoNotOptimize(ms_step(s, u, p, g));
}
BENCHMARK(BM_MsStep1d)->Arg(64)->Arg(256)->Unit(benchmark::kMillisecond);

void BM_NsStep(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const Grid g = Grid::rectangle(1.0, 1.0, n, n);
  const auto u = VelocityField::from_stream_function(
      [](double x, double y) { return std::pow(std::sin(kPi * x) * std::sin(kPi * y), 2); }, g);
  const NsSolver solver(g);
  const auto f = ForcingField::zero(g);
  for (auto _ : state) benchmark::DoNotOptimize(solver.step(u, f, 1e-3));
}
BENCHMARK(BM_NsStep)->Arg(32)->Arg(64)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "nsms/coupled.hpp"
#include "nsms/errors.hpp"
#include "oracles.hpp"

using namespace nsms;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

constexpr double kPi = std::numbers::pi;

MixtureParams three_params(double tau, double eps = 0.0) {
  return MixtureParams::from_upper_triangle({1.0, 2.0, 3.0}, {0.2, 0.5, 1.0}, eps, tau);
}

MatrixXd cosine_three(const Grid& g, double a) {
  MatrixXd rho(3, g.cell_count());
  for (int k = 0; k < g.cell_count(); ++k) {
    const double z = g.center(0, k % g.nx());
    rho(0, k) = 0.3 + a * std::cos(kPi * z);
    rho(1, k) = 0.3 - 0.5 * a * std::cos(2 * kPi * z);
    rho(2, k) = 1.0 - rho(0, k) - rho(1, k);
  }
  return rho;
}

}  // namespace

TEST(Mollify, Examples) {
  MatrixXd u = MatrixXd::Constant(3, 4, 1.0 / 3.0);
  EXPECT_LT((mollify_initial_density(u, 0.1) - u).cwiseAbs().maxCoeff(), 1e-15);
  MatrixXd r(2, 1);
  r << 1.0, 0.0;
  const MatrixXd m = mollify_initial_density(r, 0.25);
  EXPECT_NEAR(m(0, 0), 0.75, 1e-15);
  EXPECT_NEAR(m(1, 0), 0.25, 1e-15);
  EXPECT_THROW(mollify_initial_density(r, 0.3), InvalidInput);
  EXPECT_THROW(mollify_initial_density(r, 0.0), InvalidInput);

  oracle::Generator gen(51);
  for (int t = 0; t < 200; ++t) {
    const int n = gen.integer(2, 6);
    MatrixXd x(n, 5);
    for (int k = 0; k < 5; ++k) x.col(k) = gen.simplex(n, 0.0);
    const double eta = gen.uniform(1e-6, 1.0 / (2.0 * n));
    const MatrixXd y = mollify_initial_density(x, eta);
    EXPECT_GE(y.minCoeff(), eta - 1e-15);
    EXPECT_LT((y.colwise().sum().array() - 1.0).abs().maxCoeff(), 1e-14);
  }
}

TEST(RelativeEntropy, ZeroAtSteadyNonNegativeAndIdentity) {
  const Grid g = Grid::line(1.0, 32);
  const auto p = three_params(0.1);
  const MatrixXd uni = cosine_three(g, 0.0);
  const auto steady = SteadyState::from_field(uni, p, g);
  EXPECT_NEAR(relative_entropy(uni, steady, p, g), 0.0, 1e-15);
  EXPECT_NEAR(steady.rho_bar.sum(), 1.0, 1e-15);
  EXPECT_NEAR(steady.x_bar.sum(), 1.0, 1e-15);

  oracle::Generator gen(52);
  const oracle::Vec m = oracle::Vec(p.molar_masses());
  for (int t = 0; t < 50; ++t) {
    MatrixXd rho(3, 8);
    for (int k = 0; k < 8; ++k) rho.col(k) = gen.simplex(3, 0.01);
    const Grid gc = Grid::line(1.0, 8);
    const auto st = SteadyState::from_field(rho, p, gc);
    const double hs = relative_entropy(rho, st, p, gc);
    EXPECT_GE(hs, -1e-15);
    // H* = H(rho) - H(rho_bar) - sum_i w_bar_i int (rho_i - rho_bar_i) over the
    // reduced species; the linear term vanishes because masses agree.
    double h = 0.0;
    for (int k = 0; k < 8; ++k) h += oracle::entropy_density(rho.col(k), m) * gc.cell_volume();
    const double h_bar = oracle::entropy_density(oracle::Vec(st.rho_bar), m) * gc.measure();
    EXPECT_NEAR(hs, h - h_bar, 1e-12);
  }
}

TEST(CoupledStep, UniformIsFixedPoint) {
  for (const Grid& g : {Grid::line(1.0, 16), Grid::rectangle(1.0, 1.0, 8, 8)}) {
    const auto p = three_params(0.05);
    CoupledSolver solver(p, g);
    const auto s0 = solver.initialize(cosine_three(g, 0.0), VelocityField::zero(g), 0.0);
    auto s = s0;
    for (int k = 0; k < 5; ++k) s = solver.step(s, ForcingField::zero(g));
    EXPECT_LT((s.species.rho - s0.species.rho).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_LT(s.velocity.u.cwiseAbs().maxCoeff() + (s.velocity.v.size() ? s.velocity.v.cwiseAbs().maxCoeff() : 0.0), 1e-12);
  }
}

TEST(CoupledStep, RelativeEntropyDecreasesAndSimplexHolds) {
  const Grid g = Grid::line(1.0, 32);
  const auto p = MixtureParams::from_upper_triangle({1.0, 1.0}, {0.1}, 0.0, 0.01);
  MatrixXd rho(2, 32);
  for (int k = 0; k < 32; ++k) {
    rho(0, k) = 0.5 + 0.2 * std::sin(kPi * g.center(0, k));
    rho(1, k) = 1.0 - rho(0, k);
  }
  CoupledSolver solver(p, g);
  auto s = solver.initialize(rho, VelocityField::zero(g), 0.0);
  double prev = solver.diagnose(s).H_star;
  for (int k = 0; k < 10; ++k) {
    DiagnosticsRecord r;
    s = coupled_step(s, p, g, ForcingField::zero(g), {}, {}, &r);
    EXPECT_LT(r.H_star, prev);
    prev = r.H_star;
    EXPECT_LT((s.species.rho.colwise().sum().array() - 1.0).abs().maxCoeff(), 1e-12);
    EXPECT_EQ(r.step, k + 1);
  }
}

TEST(CoupledStep, VortexRunIsConsistent) {
  const Grid g = Grid::rectangle(1.0, 1.0, 16, 16);
  const auto p = MixtureParams::from_upper_triangle({1.0, 2.0}, {0.05}, 0.0, 5e-3);
  MatrixXd rho(2, g.cell_count());
  for (int k = 0; k < g.cell_count(); ++k) {
    rho(0, k) = 0.5 + 0.2 * std::cos(kPi * g.center(0, k % 16));
    rho(1, k) = 1.0 - rho(0, k);
  }
  const auto u0 = VelocityField::from_stream_function(
      [](double x, double y) { return std::pow(std::sin(kPi * x) * std::sin(kPi * y), 2); }, g);
  CoupledSolver solver(p, g);
  auto s = solver.initialize(rho, u0, 0.0);
  const DiagnosticsRecord r0 = solver.diagnose(s);
  double prev_h = r0.H;
  for (int k = 0; k < 8; ++k) {
    DiagnosticsRecord r;
    s = solver.step(s, ForcingField::zero(g), &r);
    EXPECT_LE(r.energy_lhs, r.energy_rhs * (1 + 1e-8));
    EXPECT_LE(r.max_div, 1e-10);
    EXPECT_LE(r.H, prev_h + 1e-8);
    EXPECT_LT((r.masses - r0.masses).cwiseAbs().maxCoeff(), 1e-10);
    prev_h = r.H;
  }
}

TEST(CoupledSolver, MollificationAppliedAtInitialization) {
  const Grid g = Grid::line(1.0, 8);
  const auto p = three_params(0.1);
  MatrixXd rho = cosine_three(g, 0.2);
  CoupledSolver solver(p, g);
  const auto s = solver.initialize(rho, VelocityField::zero(g), 0.1);
  EXPECT_GE(s.species.rho.minCoeff(), 0.1);
  EXPECT_LT((s.species.rho - mollify_initial_density(rho, 0.1)).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(DecayFit, ExactExponentialAndWindow) {
  std::vector<double> t, h;
  for (int k = 0; k <= 200; ++k) {
    t.push_back(0.05 * k);
    h.push_back(std::exp(-2.0 * t.back()));
  }
  const DecayFit f = decay_fit(t, h);
  EXPECT_NEAR(f.lambda_hat, 2.0, 1e-10);
  EXPECT_NEAR(f.r2, 1.0, 1e-12);
  EXPECT_FALSE(f.converged);
  EXPECT_GE(f.t_first, 0.05 * 21 - 1e-12);

  std::vector<double> tiny(h.size(), 1e-16);
  tiny[0] = 1.0;
  EXPECT_TRUE(decay_fit(t, tiny).converged);

  std::vector<double> t5(t.begin(), t.begin() + 5), h5(h.begin(), h.begin() + 5);
  EXPECT_THROW(decay_fit(t5, h5), InvalidInput);
}

TEST(CkBound, SteadyAndRandomFields) {
  const Grid g = Grid::line(1.0, 16);
  const auto p = three_params(0.1);
  const MatrixXd uni = cosine_three(g, 0.0);
  const auto steady = SteadyState::from_field(uni, p, g);
  const auto r0 = ck_bound_check(uni, steady, 0.0, p, g);
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_NEAR(r0.lhs[i], 0.0, 1e-28);
    EXPECT_EQ(r0.rhs[i], 0.0);
  }

  oracle::Generator gen(53);
  for (int t = 0; t < 100; ++t) {
    MatrixXd rho(3, 16);
    for (int k = 0; k < 16; ++k) rho.col(k) = gen.simplex(3, 0.01);
    const auto st = SteadyState::from_field(rho, p, g);
    const double hs = relative_entropy(rho, st, p, g);
    const auto rep = ck_bound_check(rho, st, hs, p, g);
    EXPECT_TRUE(rep.holds);
    for (double m : rep.margin) EXPECT_GT(m, 0.0);
  }
}

TEST(L1Drift, ZeroEpsilonAndPositiveEpsilon) {
  const Grid g = Grid::line(1.0, 32);
  for (double eps : {0.0, 1e-3}) {
    const auto p = three_params(0.01, eps);
    CoupledSolver solver(p, g);
    auto s = solver.initialize(cosine_three(g, 0.15), VelocityField::zero(g), 0.0);
    std::vector<DiagnosticsRecord> hist{solver.diagnose(s)};
    for (int k = 0; k < 20; ++k) {
      DiagnosticsRecord r;
      s = solver.step(s, ForcingField::zero(g), &r);
      hist.push_back(r);
    }
    const auto rep = l1_drift_check(hist, p, g.measure());
    EXPECT_TRUE(rep.ok) << "eps=" << eps;
    EXPECT_LE(rep.identity_residual, 1e-10);
    if (eps == 0.0) {
      EXPECT_LE(rep.max_drift, 1e-10);
      EXPECT_LE(rep.max_c_drift, 1e-10);
    } else {
      EXPECT_GT(rep.max_drift, 0.0);
      EXPECT_LE(rep.max_drift, rep.drift_bound);
      EXPECT_LE(rep.max_c_drift, rep.c_bound);
    }
  }
}

TEST(GammaSchedule, FormulasAndLimits) {
  const auto p = three_params(1.0);
  ScheduleInputs in;
  in.gamma = 1e-3;
  in.t_end = 2.0;
  in.measure = 1.0;
  in.entropy0 = -0.58;
  in.masses0 = VectorXd(3);
  in.masses0 << 0.3, 0.3, 0.4;
  in.log_sobolev_constant = 2.0 / (kPi * kPi);
  const GammaSchedule s = gamma_schedule(in, p);
  EXPECT_NEAR(s.gamma0, 0.4 / (2.0 * (0.3 + 0.3)), 1e-15);
  EXPECT_NEAR(s.m0, 2.0 / 3.0, 1e-15);
  EXPECT_NEAR(s.c1, 2.0 * 1.0 / 1.0, 1e-15);
  // epsilon saturates the drift condition: sqrt(eps T meas (H0 + C1)) = gamma min m.
  EXPECT_NEAR(std::sqrt(s.epsilon * 2.0 * 1.0 * (in.entropy0 + s.c1)), 1e-3 * 0.3, 1e-15);
  const double g0 = 1.0 / 3.0, m0 = 2.0 / 3.0, g = 1e-3;
  const double c2 = std::log((1 + m0 * g) * (1 + g) * (1 + g / (2 * g0)) /
                             ((1 - m0 * g) * (1 - g) * (1 - g / (2 * g0))));
  const double c3 = std::log((1 + g) * (1 + g / (2 * g0)) / (1 - m0 * g));
  EXPECT_NEAR(s.c2, c2, 1e-15);
  EXPECT_NEAR(s.c3, c3, 1e-15);
  const double k = 1.0 / (9.0 + 1.0);
  EXPECT_NEAR(s.c_gamma, c2 + 0.5 * c3 * k / in.log_sobolev_constant, 1e-15);
  EXPECT_GE(s.tau, 0.0);
  EXPECT_LE(s.tau, std::sqrt(s.c_gamma) + 1e-15);
  EXPECT_NEAR(s.tau * s.steps, 2.0, 1e-12);

  in.gamma = 0.5;
  EXPECT_THROW(gamma_schedule(in, p), InvalidInput);
}

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "nsms/errors.hpp"
#include "nsms/ms_field.hpp"
#include "oracles.hpp"

using namespace nsms;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

constexpr double kPi = std::numbers::pi;

VectorXd sample(const Grid& g, const std::function<double(double, double)>& f) {
  VectorXd v(g.cell_count());
  for (int j = 0; j < g.ny(); ++j) {
    for (int i = 0; i < g.nx(); ++i) {
      v(g.index(i, j)) = f(g.center(0, i), g.dim() == 2 ? g.center(1, j) : 0.0);
    }
  }
  return v;
}

MixtureParams fick_params(double tau, double eps = 0.0) {
  return MixtureParams::from_upper_triangle({1.0, 1.0}, {0.1}, eps, tau);
}

MixtureParams three_params(double tau, double eps = 0.0) {
  return MixtureParams::from_upper_triangle({1.0, 2.0, 3.0}, {0.2, 0.5, 1.0}, eps, tau);
}

// Two-species density with rho_1 = 0.5 + a cos(pi z / L).
MatrixXd two_species(const Grid& g, double a) {
  const double len = g.extent(0);
  MatrixXd rho(2, g.cell_count());
  rho.row(0) = sample(g, [&](double z, double) { return 0.5 + a * std::cos(kPi * z / len); });
  rho.row(1) = 1.0 - rho.row(0).array();
  return rho;
}

// Smooth random three-species field around (0.3, 0.3, 0.4); every row stays
// positive for amp < 2/3.
MatrixXd random_three(const Grid& g, oracle::Generator& gen, double amp) {
  MatrixXd rho(3, g.cell_count());
  for (int s = 0; s < 2; ++s) {
    const double a1 = gen.uniform(-1, 1), a2 = gen.uniform(-1, 1), a3 = gen.uniform(-1, 1);
    rho.row(s) = sample(g, [&](double x, double y) {
      return 0.3 + 0.1 * amp *
                       (a1 * std::cos(kPi * x) + a2 * std::cos(2 * kPi * x) +
                        a3 * std::cos(kPi * x) * std::cos(kPi * y));
    });
  }
  rho.row(2) = 1.0 - rho.topRows(2).colwise().sum().array();
  return rho;
}

}  // namespace

TEST(Grid, Validation) {
  EXPECT_THROW(Grid::line(1.0, 3), InvalidInput);
  EXPECT_THROW(Grid::line(0.0, 8), InvalidInput);
  EXPECT_THROW(Grid::rectangle(1.0, 1.0, 8, 2), InvalidInput);
  const Grid g = Grid::rectangle(2.0, 1.0, 8, 4);
  EXPECT_EQ(g.cell_count(), 32);
  EXPECT_DOUBLE_EQ(g.cell_volume(), 0.25 * 0.25);
  EXPECT_EQ(g.interior_faces().size(), 7u * 4u + 8u * 3u);
}

TEST(Laplacian, ConstantIsInKernel) {
  for (const Grid& g : {Grid::line(1.0, 16), Grid::rectangle(1.0, 2.0, 8, 12)}) {
    EXPECT_LT(laplacian_neumann(VectorXd::Constant(g.cell_count(), 3.0), g).cwiseAbs().maxCoeff(),
              1e-12);
    EXPECT_LT(bilaplacian(VectorXd::Constant(g.cell_count(), 3.0), g).cwiseAbs().maxCoeff(),
              1e-9);
  }
}

TEST(Laplacian, CosineEigenfunctionSecondOrder) {
  const double len = 2.0;
  double prev_err = 0.0, prev_err4 = 0.0;
  for (int n : {32, 64, 128}) {
    const Grid g = Grid::line(len, n);
    const VectorXd f = sample(g, [&](double z, double) { return std::cos(kPi * z / len); });
    const double k2 = (kPi / len) * (kPi / len);
    const double err = (laplacian_neumann(f, g) + k2 * f).cwiseAbs().maxCoeff();
    const double err4 = (bilaplacian(f, g) - k2 * k2 * f).cwiseAbs().maxCoeff();
    if (prev_err > 0.0) {
      EXPECT_NEAR(prev_err / err, 4.0, 0.1);
      EXPECT_NEAR(prev_err4 / err4, 4.0, 0.1);
    }
    prev_err = err;
    prev_err4 = err4;
  }
}

TEST(Laplacian, SymmetricNegativeSemidefinite) {
  for (const Grid& g : {Grid::line(1.0, 16), Grid::rectangle(1.0, 1.0, 4, 4)}) {
    const MatrixXd lap(laplacian_matrix(g));
    EXPECT_LT((lap - lap.transpose()).cwiseAbs().maxCoeff(), 1e-12);
    const VectorXd ev = Eigen::SelfAdjointEigenSolver<MatrixXd>(lap).eigenvalues();
    EXPECT_LT(ev.maxCoeff(), 1e-10);
    const VectorXd ev2 = Eigen::SelfAdjointEigenSolver<MatrixXd>(lap * lap).eigenvalues();
    EXPECT_GT(ev2.minCoeff(), -1e-8);
    // Matrix and matrix-free forms agree.
    oracle::Generator gen(3);
    const VectorXd f = gen.gaussian(g.cell_count(), 1).col(0);
    EXPECT_LT((lap * f - laplacian_neumann(f, g)).cwiseAbs().maxCoeff(), 1e-10);
  }
}

TEST(MsResidual, UniformStates) {
  const Grid g = Grid::line(1.0, 16);
  const auto p = three_params(0.01);
  SpeciesVector rho(3);
  rho << 0.2, 0.3, 0.5;
  const MatrixXd rho_f = rho.replicate(1, g.cell_count());
  const MatrixXd w = rho_to_w(rho, p).replicate(1, g.cell_count());
  EXPECT_LT(ms_residual(w, rho_f, VelocityField::zero(g), p, g).cwiseAbs().maxCoeff(), 1e-12);

  const auto pe = three_params(0.01, 0.3);
  const MatrixXd r = ms_residual(w, rho_f, VelocityField::zero(g), pe, g);
  EXPECT_LT((r - 0.3 * w).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(MsResidual, FickManufacturedSolutionSecondOrder) {
  // Equal masses: the residual of the exact heat solution equals
  // d_t rho - D Lap_h rho up to the O(h^2) face averaging of B.
  const double d = 0.1, tau = 1e-3, t = 0.2;
  double prev = 0.0;
  for (int n : {32, 64, 128}) {
    const Grid g = Grid::line(1.0, n);
    const auto p = fick_params(tau);
    auto rho_at = [&](double time) { return two_species(g, 0.1 * std::exp(-d * kPi * kPi * time)); };
    const MatrixXd now = rho_at(t), before = rho_at(t - tau);
    MatrixXd w(1, g.cell_count());
    for (int k = 0; k < g.cell_count(); ++k) w(0, k) = rho_to_w(now.col(k), p)(0);
    const MatrixXd r = ms_residual(w, before, VelocityField::zero(g), p, g);
    const VectorXd ref =
        (now.row(0) - before.row(0)).transpose() / tau - d * laplacian_neumann(now.row(0).transpose(), g);
    const double err = (r.row(0).transpose() - ref).cwiseAbs().maxCoeff();
    if (prev > 0.0) EXPECT_GT(prev / err, 3.5);
    prev = err;
  }
}

TEST(MsStep, UniformStateIsExactRoot) {
  const Grid g = Grid::line(1.0, 16);
  const auto p = three_params(0.01);
  SpeciesVector rho(3);
  rho << 0.2, 0.3, 0.5;
  const auto s = SpeciesFieldState::from_rho(rho.replicate(1, g.cell_count()), p);
  const auto res = ms_step(s, VelocityField::zero(g), p, g);
  EXPECT_EQ(res.stats.newton_iters, 1);
  EXPECT_LT((res.state.rho - s.rho).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(MsStep, FickModeDecaysAtHeatRate) {
  const Grid g = Grid::line(1.0, 256);
  const double tau = 1e-4, d = 0.1;
  const auto p = fick_params(tau);
  MsOptions opt;
  opt.newton_tol = 1e-13;
  auto s = SpeciesFieldState::from_rho(two_species(g, 0.1), p);
  const VectorXd mode = sample(g, [](double z, double) { return std::cos(kPi * z); });
  auto amplitude = [&](const SpeciesFieldState& st) {
    return (st.rho.row(0).transpose().array() - 0.5).matrix().dot(mode) / mode.squaredNorm();
  };
  for (int k = 0; k < 5; ++k) {
    const double before = amplitude(s);
    s = ms_step(s, VelocityField::zero(g), p, g, opt).state;
    const double ratio = amplitude(s) / before;
    EXPECT_NEAR(ratio, std::exp(-d * kPi * kPi * tau), 0.01 * std::exp(-d * kPi * kPi * tau));
  }
}

TEST(MsStep, PropertyEntropyConservationAndSimplex) {
  oracle::Generator gen(31);
  for (int trial = 0; trial < 12; ++trial) {
    const bool two_d = trial % 3 == 2;
    const Grid g = two_d ? Grid::rectangle(1.0, 1.0, 8, 8) : Grid::line(1.0, 32);
    const double eps = trial % 2 ? 1e-3 : 0.0;
    const double tau = gen.uniform(1e-3, 5e-2);
    const auto p = three_params(tau, eps);
    const auto s = SpeciesFieldState::from_rho(random_three(g, gen, 0.5), p);
    const auto res = ms_step(s, VelocityField::zero(g), p, g);
    const auto& st = res.stats;

    EXPECT_LE(st.entropy_after, st.entropy_before + 1e-10);
    EXPECT_LE(st.step_excess, 1e-10);
    EXPECT_LE(st.final_residual, MsOptions{}.newton_tol);
    EXPECT_GE(st.dissipation, 0.0);
    EXPECT_LT((res.state.rho.colwise().sum().array() - 1.0).abs().maxCoeff(), 1e-12);
    EXPECT_GT(res.state.rho.minCoeff(), 0.0);
    EXPECT_LT(res.state.rho.maxCoeff(), 1.0);

    // Mass identity: m^k - m^{k-1} = -eps tau int w (species 1..N).
    const VectorXd m0 = species_masses(s, g), m1 = species_masses(res.state, g);
    const int n = p.n_reduced();
    for (int i = 0; i < n; ++i) {
      EXPECT_NEAR(m1(i) - m0(i), -eps * tau * st.w_integral(i), 1e-10);
      const double bound = eps * tau * res.state.w.row(i).cwiseAbs().sum() * g.cell_volume();
      EXPECT_LE(std::abs(m1(i) - m0(i)), bound + 1e-10);
    }
    if (eps == 0.0) {
      EXPECT_LT((m1 - m0).cwiseAbs().maxCoeff(), 1e-10);
      EXPECT_NEAR(concentration_mass(res.state, g), concentration_mass(s, g), 1e-10);
    }
  }
}

TEST(MsStep, AdvectionConservesMassIn2D) {
  const Grid g = Grid::rectangle(1.0, 1.0, 16, 16);
  const auto p = three_params(1e-2);
  oracle::Generator gen(32);
  const auto s = SpeciesFieldState::from_rho(random_three(g, gen, 0.5), p);
  const auto u = VelocityField::from_stream_function(
      [](double x, double y) {
        return std::pow(std::sin(kPi * x) * std::sin(kPi * y), 2);
      },
      g);
  const auto res = ms_step(s, u, p, g);
  EXPECT_LT((species_masses(res.state, g) - species_masses(s, g)).cwiseAbs().maxCoeff(), 1e-10);
  EXPECT_TRUE(std::isfinite(res.stats.advection_defect));
  EXPECT_LT(res.stats.step_excess, 1e-3);
}

TEST(MsStep, TimeStepRescue) {
  const Grid g = Grid::line(1.0, 32);
  const auto p = three_params(1.0);
  oracle::Generator gen(33);
  const auto s = SpeciesFieldState::from_rho(random_three(g, gen, 0.5), p);

  MsOptions tight;
  tight.max_newton_iterations = 1;
  tight.max_tau_halvings = 2;
  EXPECT_THROW(ms_step(s, VelocityField::zero(g), p, g, tight), ConvergenceError);

  MsOptions few;
  few.max_newton_iterations = 6;
  const auto res = ms_step(s, VelocityField::zero(g), p, g, few);
  EXPECT_GT(res.stats.tau_halvings, 0);
  EXPECT_GT(res.stats.substeps, 1);
  EXPECT_NEAR(res.state.time, 1.0, 1e-14);
  EXPECT_LT((species_masses(res.state, g) - species_masses(s, g)).cwiseAbs().maxCoeff(), 1e-10);
  EXPECT_LE(res.stats.entropy_after, res.stats.entropy_before);
}

TEST(SpeciesFieldState, RejectsBoundaryStates) {
  const auto p = fick_params(0.1);
  MatrixXd rho(2, 4);
  rho << 0.5, 1.0, 0.5, 0.5, 0.5, 0.0, 0.5, 0.5;
  EXPECT_THROW(SpeciesFieldState::from_rho(rho, p), InvalidInput);
  EXPECT_THROW(SpeciesFieldState::from_w(MatrixXd::Constant(1, 4, NAN), p), InvalidInput);
}

TEST(EntropyFunctional, UniformLowerBoundAndRefinement) {
  const auto p = three_params(0.1);
  SpeciesVector rho(3);
  rho << 0.2, 0.3, 0.5;
  const Grid g = Grid::line(2.0, 8);
  EXPECT_NEAR(entropy_functional(rho.replicate(1, 8), p, g), 2.0 * entropy_density(rho, p),
              1e-14);

  oracle::Generator gen(34);
  const Grid g1 = Grid::line(1.0, 32);
  for (int t = 0; t < 20; ++t) {
    const double h = entropy_functional(random_three(g1, gen, 0.6), p, g1);
    EXPECT_GE(h, -2.0 * 1.0 / 1.0);
  }

  // For an even profile in cos(pi z) the midpoint rule is spectrally accurate,
  // so coarse grids already match a fine oracle quadrature.
  const oracle::Vec masses = oracle::Vec::Ones(2);
  double ref = 0.0;
  const int fine = 20000;
  for (int k = 0; k < fine; ++k) {
    const double r1 = 0.5 + 0.3 * std::cos(kPi * (k + 0.5) / fine);
    ref += oracle::entropy_density((oracle::Vec(2) << r1, 1.0 - r1).finished(), masses) / fine;
  }
  for (int n : {32, 64, 128}) {
    const Grid gn = Grid::line(1.0, n);
    EXPECT_NEAR(entropy_functional(two_species(gn, 0.3), fick_params(0.1), gn), ref, 1e-12);
  }
}

TEST(Dissipation, UniformZeroAndPositiveRatio) {
  const auto p = three_params(0.1);
  const Grid g = Grid::line(1.0, 16);
  SpeciesVector rho(3);
  rho << 0.2, 0.3, 0.5;
  const auto uni = dissipation_terms(SpeciesFieldState::from_rho(rho.replicate(1, 16), p), p, g);
  EXPECT_EQ(uni.bww, 0.0);
  EXPECT_EQ(uni.sqrtx, 0.0);

  oracle::Generator gen(35);
  double min_ratio = INFINITY;
  for (int t = 0; t < 30; ++t) {
    const Grid gt = t % 2 ? Grid::rectangle(1.0, 1.0, 8, 8) : Grid::line(1.0, 32);
    const auto d = dissipation_terms(SpeciesFieldState::from_rho(random_three(gt, gen, 0.6), p), p, gt);
    EXPECT_GE(d.bww, 0.0);
    min_ratio = std::min(min_ratio, d.bww / d.sqrtx);
  }
  EXPECT_GT(min_ratio, 0.0);
}

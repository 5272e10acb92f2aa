#pragma once

// Incompressible Navier-Stokes on a staggered (MAC) grid with no-slip walls:
// one linearly implicit step per call, convection frozen at the previous
// velocity and written in skew-symmetric form, incompressibility enforced
// exactly through a coupled velocity-pressure solve followed by a Neumann
// pressure projection that removes roundoff divergence.

#include <Eigen/Dense>
#include <Eigen/SparseCore>
#include <array>
#include <functional>
#include <memory>
#include <vector>

#include "nsms/grid.hpp"

namespace nsms {

/// Face-normal velocity components. `u` lives on x-faces, index i + (nx+1) j;
/// `v` on y-faces, index i + nx j. In 1D `v` is empty and `u` is identically 0.
struct VelocityField {
  Eigen::VectorXd u;
  Eigen::VectorXd v;

  static VelocityField zero(const Grid& grid);
  /// Samples the stream function psi at cell corners and differences it,
  /// which yields a discretely divergence-free field. psi must vanish on the
  /// boundary for no-penetration.
  static VelocityField from_stream_function(const std::function<double(double, double)>& psi,
                                            const Grid& grid);
};

/// Cell-centered pressure, normalized to zero mean.
struct PressureField {
  Eigen::VectorXd p;
};

/// Face-centered force density, laid out like VelocityField.
struct ForcingField {
  Eigen::VectorXd fu;
  Eigen::VectorXd fv;

  static ForcingField zero(const Grid& grid);
};

/// f^k: the time average of f over [t0, t1], by 3-point Gauss-Legendre in time.
ForcingField average_forcing(
    const std::function<std::array<double, 2>(double x, double y, double t)>& f, double t0,
    double t1, const Grid& grid);

double l2_norm_sq(const VelocityField& u, const Grid& grid);
double kinetic_energy(const VelocityField& u, const Grid& grid);
/// Discrete Dirichlet form ||grad u||^2 = -<L u, u> with the no-slip Laplacian.
double gradient_norm_sq(const VelocityField& u, const Grid& grid);
double inner(const ForcingField& f, const VelocityField& u, const Grid& grid);

/// MAC divergence per cell.
Eigen::VectorXd divergence(const VelocityField& u, const Grid& grid);
double max_abs_divergence(const VelocityField& u, const Grid& grid);

/// Cell-centered interpolation, for output.
Eigen::MatrixXd velocity_at_centers(const VelocityField& u, const Grid& grid);

struct NsOptions {
  double div_tol = 1e-10;
};

struct NsStepStats {
  double norm_sq_prev = 0.0;   // ||u^{k-1}||^2
  double norm_sq = 0.0;        // ||u^k||^2
  double increment_sq = 0.0;   // ||u^k - u^{k-1}||^2
  double grad_sq = 0.0;        // ||grad u^k||^2
  double forcing_work = 0.0;   // <f^k, u^k>
  double max_div = 0.0;
};

struct NsStepResult {
  VelocityField velocity;
  PressureField pressure;
  NsStepStats stats;
};

/// Holds the grid-dependent sparse operators and factorizations.
class NsSolver {
 public:
  explicit NsSolver(const Grid& grid, NsOptions options = {});
  ~NsSolver();
  NsSolver(NsSolver&&) noexcept;
  NsSolver& operator=(NsSolver&&) noexcept;

  const Grid& grid() const { return grid_; }

  /// Solves (I/tau + C(u_prev) - L) u + grad p = u_prev/tau + f, div u = 0.
  NsStepResult step(const VelocityField& u_prev, const ForcingField& f, double tau) const;

  /// Orthogonal projection onto discretely divergence-free fields.
  VelocityField project(const VelocityField& u) const;

  /// Solves (I - tau L) u = u0 with homogeneous Dirichlet data.
  VelocityField smooth(const VelocityField& u0, double tau) const;

  /// ||f||_*^2 = <f, (-L)^{-1} f>, a bound on the squared dual norm of f.
  double dual_norm_sq(const ForcingField& f) const;

 private:
  struct Impl;
  Grid grid_;
  NsOptions options_;
  std::unique_ptr<Impl> impl_;
};

VelocityField smooth_initial_velocity(const VelocityField& u0, double tau, const Grid& grid);
NsStepResult ns_step(const VelocityField& u_prev, const ForcingField& f_k, double tau,
                     const Grid& grid, NsOptions options = {});

struct EnergyStepCheck {
  int step = 0;
  double lhs = 0.0;  // ||u^k||^2 + ||u^k - u^{k-1}||^2 + 2 tau ||grad u^k||^2
  double rhs = 0.0;  // ||u^{k-1}||^2 + 2 tau <f^k, u^k>
  double cumulative_lhs = 0.0;
  double cumulative_bound = 0.0;
  bool step_ok = false;
  bool cumulative_ok = false;
};

struct EnergyReport {
  std::vector<EnergyStepCheck> steps;
  bool all_ok = true;
};

/// Checks the discrete energy estimate over a velocity history u^0..u^K with
/// forcing f^1..f^K (an empty `f_seq` means f = 0). `rel_tol` is relative to
/// the right-hand side.
EnergyReport energy_diagnostics(const std::vector<VelocityField>& u_seq,
                                const std::vector<ForcingField>& f_seq, double tau,
                                const Grid& grid, double rel_tol = 1e-8);

}  // namespace nsms

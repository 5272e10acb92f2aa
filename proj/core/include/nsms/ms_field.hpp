#pragma once

// Cell-centered finite-volume discretization of the regularized
// Maxwell-Stefan subsystem in entropy variables, with implicit Euler in time
// and a damped Newton solve per step. No-flux (mirrored ghost) boundaries.
//
// Field layout: column k of every matrix is cell k; rows are species.
// w is N x cells, rho and x are (N+1) x cells.

#include <Eigen/Dense>
#include <Eigen/SparseCore>

#include "nsms/grid.hpp"
#include "nsms/mixture.hpp"
#include "nsms/ns_field.hpp"

namespace nsms {

/// A species state on a grid. Only constructible from w, so rho = w_to_rho(w)
/// holds at every cell by construction.
struct SpeciesFieldState {
  Eigen::MatrixXd w;
  Eigen::MatrixXd rho;
  Eigen::MatrixXd x;
  Eigen::VectorXd c;
  double time = 0.0;

  static SpeciesFieldState from_w(const Eigen::MatrixXd& w, const MixtureParams& params,
                                  double time = 0.0, const FixedPointOptions& fp = {});
  /// Goes through rho_to_w; every cell must be strictly interior.
  static SpeciesFieldState from_rho(const Eigen::MatrixXd& rho, const MixtureParams& params,
                                    double time = 0.0, const FixedPointOptions& fp = {});

  int cell_count() const { return static_cast<int>(w.cols()); }
};

struct MsOptions {
  double newton_tol = 1e-10;
  int max_newton_iterations = 50;
  int max_step_halvings = 30;
  int max_tau_halvings = 10;
  double linear_tol = 1e-12;
  FixedPointOptions fixed_point;
};

struct StepStats {
  int newton_iters = 0;
  double final_residual = 0.0;  // tau * max|R| of the last substep
  double entropy_before = 0.0;
  double entropy_after = 0.0;
  // Per-unit-time rates averaged over substeps, so tau * rate is the step total.
  double dissipation = 0.0;        // int grad w : B grad w
  double dissipation_sqrtx = 0.0;  // int |grad sqrt x|^2
  double eps_norm = 0.0;           // ||L w||^2 + ||w||^2 (without the factor epsilon)
  double advection_defect = 0.0;   // int w . div(u rho')
  Eigen::VectorXd w_integral;      // int w_i
  /// H_after + tau*dissipation + eps*tau*eps_norm - H_before.
  double step_excess = 0.0;
  int tau_halvings = 0;
  int substeps = 1;
};

struct MsStepResult {
  SpeciesFieldState state;
  StepStats stats;
};

/// Neumann Laplacian with mirrored ghost cells, as a sparse cells x cells matrix.
Eigen::SparseMatrix<double> laplacian_matrix(const Grid& grid);
Eigen::VectorXd laplacian_neumann(const Eigen::VectorXd& f, const Grid& grid);
Eigen::VectorXd bilaplacian(const Eigen::VectorXd& f, const Grid& grid);

/// Strong-form residual per cell (N x cells):
/// (rho'(w) - rho_prev')/tau + div(u rho'(w)) - div(B(w) grad w) + eps (L^2 w + w).
/// Uses params.tau() and params.epsilon().
Eigen::MatrixXd ms_residual(const Eigen::MatrixXd& w_next, const Eigen::MatrixXd& rho_prev,
                            const VelocityField& u, const MixtureParams& params,
                            const Grid& grid, const FixedPointOptions& fp = {});

/// One implicit step of length params.tau(). On Newton failure the step is
/// split into two half steps, recursively, up to options.max_tau_halvings.
MsStepResult ms_step(const SpeciesFieldState& prev, const VelocityField& u,
                     const MixtureParams& params, const Grid& grid,
                     const MsOptions& options = {});

/// Midpoint quadrature of the entropy density.
double entropy_functional(const Eigen::MatrixXd& rho, const MixtureParams& params,
                          const Grid& grid);

struct DissipationTerms {
  double bww = 0.0;    // int grad w : B grad w
  double sqrtx = 0.0;  // int |grad sqrt x|^2
};

/// Face-difference quadrature; B is evaluated at the face-averaged w.
DissipationTerms dissipation_terms(const SpeciesFieldState& state, const MixtureParams& params,
                                   const Grid& grid, const FixedPointOptions& fp = {});

/// int w . div(u rho') over the domain; zero in the continuum for
/// divergence-free u with no penetration.
double advection_defect(const SpeciesFieldState& state, const VelocityField& u,
                        const Grid& grid);

/// int rho_i, one entry per species (N+1).
Eigen::VectorXd species_masses(const SpeciesFieldState& state, const Grid& grid);
/// int c.
double concentration_mass(const SpeciesFieldState& state, const Grid& grid);

}  // namespace nsms

#pragma once

// Time-level driver for the coupled system (Navier-Stokes step, then the
// Maxwell-Stefan step with the new velocity), preparation of initial data,
// and the long-time diagnostics: relative entropy, decay-rate fit, the
// Csiszar-Kullback L1 bound and the L1 drift bounds for epsilon > 0.

#include <Eigen/Dense>
#include <optional>
#include <string>
#include <vector>

#include "nsms/config.hpp"
#include "nsms/grid.hpp"
#include "nsms/mixture.hpp"
#include "nsms/ms_field.hpp"
#include "nsms/ns_field.hpp"

namespace nsms {

/// Homogeneous state with the same species masses as the initial data.
struct SteadyState {
  SpeciesVector rho_bar;
  double c_bar = 0.0;
  SpeciesVector x_bar;

  /// `masses` are the integrals of rho_i over a domain of the given measure.
  static SteadyState from_masses(const Eigen::VectorXd& masses, double measure,
                                 const MixtureParams& params);
  static SteadyState from_field(const Eigen::MatrixXd& rho, const MixtureParams& params,
                                const Grid& grid);
};

struct DiagnosticsRecord {
  int step = 0;
  double time = 0.0;
  double H = 0.0;
  double H_star = 0.0;
  double diss_bww = 0.0;
  double diss_sqrtx = 0.0;
  double eps_norm = 0.0;
  Eigen::VectorXd masses;  // N+1
  double c_mass = 0.0;
  double kinetic_energy = 0.0;
  double max_div = 0.0;
  double min_rho = 0.0;
  double max_rho = 0.0;
  double advection_defect = 0.0;

  // Not part of the CSV.
  Eigen::VectorXd w_integrals;  // int w_i, N entries
  double step_excess = 0.0;     // H + tau diss + eps tau eps_norm - H_prev
  int newton_iters = 0;
  int tau_halvings = 0;
  double energy_lhs = 0.0;  // ||u^k||^2 + ||u^k-u^{k-1}||^2 + 2 tau ||grad u^k||^2
  double energy_rhs = 0.0;  // ||u^{k-1}||^2 + 2 tau <f^k, u^k>
};

struct CoupledState {
  SpeciesFieldState species;
  VelocityField velocity;
  PressureField pressure;
  int step = 0;
};

/// rho_i -> (rho_i + 2 eta0) / (1 + 2 eta0 (N+1)), cellwise. Columns are cells.
Eigen::MatrixXd mollify_initial_density(const Eigen::MatrixXd& rho0, double eta0);

/// H* = sum_i int c x_i ln(x_i / x_bar_i).
double relative_entropy(const Eigen::MatrixXd& rho, const SteadyState& steady,
                        const MixtureParams& params, const Grid& grid);

class CoupledSolver {
 public:
  CoupledSolver(MixtureParams params, Grid grid, MsOptions ms = {}, NsOptions ns = {});

  const MixtureParams& params() const { return params_; }
  const Grid& grid() const { return grid_; }
  const SteadyState& steady() const { return steady_; }
  void set_steady(const SteadyState& steady) { steady_ = steady; }

  /// Smooths u0, projects it onto divergence-free fields, mollifies rho0
  /// (eta0 > 0) and fixes the steady state from the resulting masses.
  CoupledState initialize(const Eigen::MatrixXd& rho0, const VelocityField& u0, double eta0);

  /// Diagnostics of a state without step information (used for step 0).
  DiagnosticsRecord diagnose(const CoupledState& state) const;

  /// One time level; `record` receives the diagnostics of the new state.
  CoupledState step(const CoupledState& state, const ForcingField& f,
                    DiagnosticsRecord* record = nullptr) const;

 private:
  MixtureParams params_;
  Grid grid_;
  MsOptions ms_options_;
  NsSolver ns_;
  SteadyState steady_;
};

/// Stateless convenience wrapper: the steady state is taken from `state`.
CoupledState coupled_step(const CoupledState& state, const MixtureParams& params,
                          const Grid& grid, const ForcingField& f, MsOptions ms = {},
                          NsOptions ns = {}, DiagnosticsRecord* record = nullptr);

struct DecayFitOptions {
  double transient_fraction = 0.1;
  double floor = 1e-12;
  int min_samples = 10;
  double converged_below = 1e-14;
};

struct DecayFit {
  double lambda_hat = 0.0;
  double r2 = 0.0;
  int samples = 0;
  bool converged = false;  // every H* after the transient is below converged_below
  double t_first = 0.0;
  double t_last = 0.0;
};

/// Least-squares fit of ln H* against t over the window after the transient
/// where floor <= H* <= H*(0)/2. Throws InvalidInput when the window holds
/// fewer than min_samples points and the run has not converged.
DecayFit decay_fit(const std::vector<double>& times, const std::vector<double>& hstar,
                   const DecayFitOptions& options = {});

struct CkReport {
  std::vector<double> lhs;     // ||c x_i - c x_bar_i||_1^2
  std::vector<double> rhs;     // C_K ||rho_i^0||_1 H* / M_i
  std::vector<double> l1;      // ||c x_i - c x_bar_i||_1
  std::vector<double> margin;  // rhs - lhs
  bool holds = true;
};

inline constexpr double kCsiszarKullbackConstant = 2.0;

CkReport ck_bound_check(const Eigen::MatrixXd& rho, const SteadyState& steady, double hstar,
                        const MixtureParams& params, const Grid& grid,
                        double ck = kCsiszarKullbackConstant);

struct L1DriftReport {
  double identity_residual = 0.0;  // max |m^k - m^0 + eps tau sum_j int w^j|
  double max_drift = 0.0;          // max over k, i <= N of |m_i^k - m_i^0|
  double max_drift_last = 0.0;     // the same for species N+1
  double max_c_drift = 0.0;
  double drift_bound = 0.0;        // sqrt(eps T meas (H0 + C1)) at the final time
  double gamma = 0.0;              // smallest gamma compatible with the epsilon used
  double c_bound = 0.0;            // M0 gamma ||c^0||_1
  bool drift_ok = true;
  bool c_ok = true;
  bool ok = true;
};

/// Checks the L1 drift identity and bounds on a diagnostics history (step 0
/// first). `tol` absorbs solver tolerance and roundoff per check.
L1DriftReport l1_drift_check(const std::vector<DiagnosticsRecord>& history,
                             const MixtureParams& params, double measure, double tol = 1e-10);

struct ScheduleInputs {
  double gamma = 0.0;
  double t_end = 0.0;
  double measure = 0.0;
  double entropy0 = 0.0;            // H(rho^0)
  Eigen::VectorXd masses0;          // ||rho_i^0||_1, N+1 entries
  double log_sobolev_constant = 0.0;
};

struct GammaSchedule {
  double gamma = 0.0;
  double gamma0 = 0.0;
  double m0 = 0.0;
  double c1 = 0.0;
  double c2 = 0.0;
  double c3 = 0.0;
  double c_gamma = 0.0;
  double epsilon = 0.0;
  double tau = 0.0;  // sqrt(C_gamma), shortened so that it divides t_end
  int steps = 0;
};

/// epsilon from the L1 drift condition, tau = sqrt(C_gamma). Requires
/// 0 < gamma < min(1/2, gamma0, 1/(2 M0)).
GammaSchedule gamma_schedule(const ScheduleInputs& in, const MixtureParams& params);

// ---------------------------------------------------------------------------
// Whole runs

struct SimulationSetup {
  Grid grid;
  MixtureParams params;
  int steps = 0;
  Eigen::MatrixXd rho0;
  VelocityField u0;
  std::optional<GammaSchedule> schedule;
};

/// Builds grid, parameters and initial data from a validated config.
SimulationSetup build_setup(const RunConfig& config);

struct RunResult {
  CoupledState state;  // last good state
  std::vector<DiagnosticsRecord> history;
  std::optional<GammaSchedule> schedule;
  bool ok = true;
  std::string error;
  int failed_step = 0;
  std::string diagnostics_path;
};

/// Runs the configured number of steps. Writes diagnostics.csv and snapshots
/// into config.output_dir when it is set. A failing step stops the run; the
/// result then carries the last good state and ok = false.
RunResult run_simulation(const RunConfig& config);

}  // namespace nsms

#include "nsms/coupled.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <numbers>
#include <random>
#include <sstream>

#include "nsms/errors.hpp"
#include "nsms/snapshot_io.hpp"

namespace nsms {

using Eigen::MatrixXd;
using Eigen::VectorXd;

// ---------------------------------------------------------------------------
// Steady state and relative entropy

SteadyState SteadyState::from_masses(const VectorXd& masses, double measure,
                                     const MixtureParams& params) {
  if (masses.size() != params.n_species()) throw InvalidInput("need one mass per species");
  if (!(measure > 0.0)) throw InvalidInput("domain measure must be positive");
  if ((masses.array() <= 0.0).any()) throw InvalidInput("species masses must be positive");
  SteadyState s;
  s.rho_bar = masses / measure;
  s.c_bar = (s.rho_bar.array() / params.molar_masses().array()).sum();
  s.x_bar = (s.rho_bar.array() / (s.c_bar * params.molar_masses().array())).matrix();
  return s;
}

SteadyState SteadyState::from_field(const MatrixXd& rho, const MixtureParams& params,
                                    const Grid& grid) {
  return from_masses(rho.rowwise().sum() * grid.cell_volume(), grid.measure(), params);
}

double relative_entropy(const MatrixXd& rho, const SteadyState& steady,
                        const MixtureParams& params, const Grid& grid) {
  if (rho.rows() != params.n_species() || rho.cols() != grid.cell_count()) {
    throw InvalidInput("relative_entropy: field does not match grid and species");
  }
  const auto& m = params.molar_masses();
  const SpeciesVector log_bar = steady.x_bar.array().log().matrix();
  double acc = 0.0;
  for (Eigen::Index k = 0; k < rho.cols(); ++k) {
    const double c = (rho.col(k).array() / m.array()).sum();
    for (int i = 0; i < params.n_species(); ++i) {
      const double cx = rho(i, k) / m(i);  // c x_i
      if (cx > 0.0) acc += cx * (std::log(cx / c) - log_bar(i));
    }
  }
  return acc * grid.cell_volume();
}

MatrixXd mollify_initial_density(const MatrixXd& rho0, double eta0) {
  const auto n1 = static_cast<double>(rho0.rows());
  if (!(eta0 > 0.0) || eta0 > 1.0 / (2.0 * n1)) {
    std::ostringstream os;
    os << "eta0 must lie in (0, 1/(2(N+1))] = (0, " << 1.0 / (2.0 * n1) << "]";
    throw InvalidInput(os.str());
  }
  if ((rho0.array() < 0.0).any()) throw InvalidInput("mollify: negative density");
  return (rho0.array() + 2.0 * eta0) / (1.0 + 2.0 * eta0 * n1);
}

// ---------------------------------------------------------------------------
// CoupledSolver

CoupledSolver::CoupledSolver(MixtureParams params, Grid grid, MsOptions ms, NsOptions ns)
    : params_(std::move(params)),
      grid_(std::move(grid)),
      ms_options_(ms),
      ns_(grid_, ns) {}

CoupledState CoupledSolver::initialize(const MatrixXd& rho0, const VelocityField& u0,
                                       double eta0) {
  const MatrixXd rho = eta0 > 0.0 ? mollify_initial_density(rho0, eta0) : rho0;
  CoupledState s;
  s.species = SpeciesFieldState::from_rho(rho, params_, 0.0, ms_options_.fixed_point);
  s.velocity = ns_.project(ns_.smooth(u0, params_.tau()));
  s.pressure.p = VectorXd::Zero(grid_.cell_count());
  s.step = 0;
  steady_ = SteadyState::from_field(s.species.rho, params_, grid_);
  return s;
}

namespace {

void fill_common(DiagnosticsRecord& r, const CoupledState& s, const SteadyState& steady,
                 const MixtureParams& params, const Grid& grid) {
  r.step = s.step;
  r.time = s.species.time;
  r.H_star = relative_entropy(s.species.rho, steady, params, grid);
  r.masses = species_masses(s.species, grid);
  r.c_mass = concentration_mass(s.species, grid);
  r.kinetic_energy = kinetic_energy(s.velocity, grid);
  r.max_div = grid.dim() == 2 ? max_abs_divergence(s.velocity, grid) : 0.0;
  r.min_rho = s.species.rho.minCoeff();
  r.max_rho = s.species.rho.maxCoeff();
}

}  // namespace

DiagnosticsRecord CoupledSolver::diagnose(const CoupledState& state) const {
  DiagnosticsRecord r;
  fill_common(r, state, steady_, params_, grid_);
  r.H = entropy_functional(state.species.rho, params_, grid_);
  const DissipationTerms d =
      dissipation_terms(state.species, params_, grid_, ms_options_.fixed_point);
  r.diss_bww = d.bww;
  r.diss_sqrtx = d.sqrtx;
  const MatrixXd lw = laplacian_matrix(grid_) * state.species.w.transpose();
  r.eps_norm = (lw.squaredNorm() + state.species.w.squaredNorm()) * grid_.cell_volume();
  r.advection_defect = advection_defect(state.species, state.velocity, grid_);
  r.w_integrals = state.species.w.rowwise().sum() * grid_.cell_volume();
  return r;
}

CoupledState CoupledSolver::step(const CoupledState& state, const ForcingField& f,
                                 DiagnosticsRecord* record) const {
  const int k = state.step + 1;
  NsStepResult ns;
  try {
    ns = ns_.step(state.velocity, f, params_.tau());
  } catch (const ConvergenceError& e) {
    throw ConvergenceError("step " + std::to_string(k) + " (Navier-Stokes): " + e.what());
  }
  MsStepResult ms;
  try {
    ms = ms_step(state.species, ns.velocity, params_, grid_, ms_options_);
  } catch (const ConvergenceError& e) {
    throw ConvergenceError("step " + std::to_string(k) + " (Maxwell-Stefan): " + e.what());
  }

  CoupledState next;
  next.species = std::move(ms.state);
  next.velocity = std::move(ns.velocity);
  next.pressure = std::move(ns.pressure);
  next.step = k;

  if (record) {
    DiagnosticsRecord& r = *record;
    r = DiagnosticsRecord{};
    fill_common(r, next, steady_, params_, grid_);
    const StepStats& st = ms.stats;
    r.H = st.entropy_after;
    r.diss_bww = st.dissipation;
    r.diss_sqrtx = st.dissipation_sqrtx;
    r.eps_norm = st.eps_norm;
    r.advection_defect = st.advection_defect;
    r.w_integrals = st.w_integral;
    r.step_excess = st.step_excess;
    r.newton_iters = st.newton_iters;
    r.tau_halvings = st.tau_halvings;
    const NsStepStats& e = ns.stats;
    r.energy_lhs = e.norm_sq + e.increment_sq + 2.0 * params_.tau() * e.grad_sq;
    r.energy_rhs = e.norm_sq_prev + 2.0 * params_.tau() * e.forcing_work;
    if (grid_.dim() == 2) r.max_div = e.max_div;
  }
  return next;
}

CoupledState coupled_step(const CoupledState& state, const MixtureParams& params,
                          const Grid& grid, const ForcingField& f, MsOptions ms, NsOptions ns,
                          DiagnosticsRecord* record) {
  CoupledSolver solver(params, grid, ms, ns);
  solver.set_steady(SteadyState::from_field(state.species.rho, params, grid));
  return solver.step(state, f, record);
}

// ---------------------------------------------------------------------------
// Long-time diagnostics

DecayFit decay_fit(const std::vector<double>& times, const std::vector<double>& hstar,
                   const DecayFitOptions& opt) {
  if (times.size() != hstar.size() || times.empty()) {
    throw InvalidInput("decay_fit: need matching, non-empty sequences");
  }
  const std::size_t n = times.size();
  const auto first = static_cast<std::size_t>(std::ceil(opt.transient_fraction * n));
  DecayFit fit;

  bool all_tiny = first < n;
  for (std::size_t k = first; k < n; ++k) all_tiny = all_tiny && hstar[k] < opt.converged_below;
  if (all_tiny) {
    fit.converged = true;
    return fit;
  }

  const double upper = 0.5 * hstar.front();
  std::vector<double> t, y;
  for (std::size_t k = first; k < n; ++k) {
    if (hstar[k] >= opt.floor && hstar[k] <= upper) {
      t.push_back(times[k]);
      y.push_back(std::log(hstar[k]));
    }
  }
  if (static_cast<int>(t.size()) < opt.min_samples) {
    throw InvalidInput("decay_fit: only " + std::to_string(t.size()) +
                       " samples in the fit window, need " + std::to_string(opt.min_samples));
  }
  const auto m = static_cast<double>(t.size());
  double tm = 0.0, ym = 0.0;
  for (std::size_t k = 0; k < t.size(); ++k) {
    tm += t[k];
    ym += y[k];
  }
  tm /= m;
  ym /= m;
  double stt = 0.0, sty = 0.0, syy = 0.0;
  for (std::size_t k = 0; k < t.size(); ++k) {
    stt += (t[k] - tm) * (t[k] - tm);
    sty += (t[k] - tm) * (y[k] - ym);
    syy += (y[k] - ym) * (y[k] - ym);
  }
  if (!(stt > 0.0)) throw InvalidInput("decay_fit: fit window has zero time span");
  const double slope = sty / stt;
  double ss_res = 0.0;
  for (std::size_t k = 0; k < t.size(); ++k) {
    const double e = y[k] - (ym + slope * (t[k] - tm));
    ss_res += e * e;
  }
  fit.lambda_hat = -slope;
  fit.r2 = syy > 0.0 ? 1.0 - ss_res / syy : 1.0;
  fit.samples = static_cast<int>(t.size());
  fit.t_first = t.front();
  fit.t_last = t.back();
  return fit;
}

CkReport ck_bound_check(const MatrixXd& rho, const SteadyState& steady, double hstar,
                        const MixtureParams& params, const Grid& grid, double ck) {
  if (rho.rows() != params.n_species() || rho.cols() != grid.cell_count()) {
    throw InvalidInput("ck_bound_check: field does not match grid and species");
  }
  const auto& m = params.molar_masses();
  const int n1 = params.n_species();
  const double vol = grid.cell_volume();
  CkReport rep;
  rep.l1.assign(n1, 0.0);
  for (Eigen::Index k = 0; k < rho.cols(); ++k) {
    const double c = (rho.col(k).array() / m.array()).sum();
    for (int i = 0; i < n1; ++i) rep.l1[i] += std::abs(rho(i, k) / m(i) - c * steady.x_bar(i));
  }
  for (int i = 0; i < n1; ++i) {
    rep.l1[i] *= vol;
    const double lhs = rep.l1[i] * rep.l1[i];
    const double mass0 = steady.rho_bar(i) * grid.measure();
    const double rhs = ck * mass0 * std::max(hstar, 0.0) / m(i);
    rep.lhs.push_back(lhs);
    rep.rhs.push_back(rhs);
    rep.margin.push_back(rhs - lhs);
    rep.holds = rep.holds && lhs <= rhs;
  }
  return rep;
}

L1DriftReport l1_drift_check(const std::vector<DiagnosticsRecord>& history,
                             const MixtureParams& params, double measure, double tol) {
  L1DriftReport rep;
  if (history.empty()) return rep;
  const int n = params.n_reduced();
  const double eps = params.epsilon();
  const double tau = params.tau();
  const DiagnosticsRecord& h0 = history.front();
  const double c1 = n * measure / params.min_molar_mass();
  const double budget = std::max(h0.H + c1, 0.0);

  VectorXd w_sum = VectorXd::Zero(n);
  for (std::size_t k = 1; k < history.size(); ++k) {
    const DiagnosticsRecord& r = history[k];
    w_sum += r.w_integrals;
    const double bound = std::sqrt(eps * r.time * measure * budget);
    double drift = 0.0;
    for (int i = 0; i < n; ++i) {
      const double d = r.masses(i) - h0.masses(i);
      drift = std::max(drift, std::abs(d));
      rep.identity_residual = std::max(rep.identity_residual, std::abs(d + eps * tau * w_sum(i)));
    }
    const double drift_last = std::abs(r.masses(n) - h0.masses(n));
    rep.max_drift = std::max(rep.max_drift, drift);
    rep.max_drift_last = std::max(rep.max_drift_last, drift_last);
    rep.max_c_drift = std::max(rep.max_c_drift, std::abs(r.c_mass - h0.c_mass));
    rep.drift_ok = rep.drift_ok && drift <= bound + tol && drift_last <= n * bound + tol;
  }

  const double t_end = history.back().time;
  rep.drift_bound = std::sqrt(eps * t_end * measure * budget);
  const double min_mass = h0.masses.head(n).minCoeff();
  rep.gamma = rep.drift_bound / min_mass;
  const auto& m = params.molar_masses();
  double m0 = 0.0;
  for (int i = 0; i < n; ++i) m0 = std::max(m0, std::abs(1.0 - m(i) / m(n)));
  rep.c_bound = m0 * rep.gamma * h0.c_mass;
  rep.c_ok = rep.max_c_drift <= rep.c_bound + tol;
  rep.ok = rep.drift_ok && rep.c_ok && rep.identity_residual <= tol;
  return rep;
}

GammaSchedule gamma_schedule(const ScheduleInputs& in, const MixtureParams& params) {
  const int n = params.n_reduced();
  if (in.masses0.size() != params.n_species()) throw InvalidInput("schedule: need N+1 masses");
  if (!(in.t_end > 0.0) || !(in.measure > 0.0)) throw InvalidInput("schedule: need T, meas > 0");
  if (!(in.log_sobolev_constant > 0.0)) throw InvalidInput("schedule: need C_L > 0");
  const auto& m = params.molar_masses();
  GammaSchedule s;
  s.gamma = in.gamma;
  for (int i = 0; i < n; ++i) s.m0 = std::max(s.m0, std::abs(1.0 - m(i) / m(n)));
  const double sum_reduced = in.masses0.head(n).sum();
  s.gamma0 = in.masses0(n) / (2.0 * sum_reduced);
  double limit = std::min(0.5, s.gamma0);
  if (s.m0 > 0.0) limit = std::min(limit, 1.0 / (2.0 * s.m0));
  if (!(in.gamma > 0.0) || !(in.gamma < limit)) {
    std::ostringstream os;
    os << "gamma must lie in (0, " << limit << ") for this initial state";
    throw InvalidInput(os.str());
  }
  const double g = in.gamma;
  const double m_min = params.min_molar_mass();
  const double m_max = params.max_molar_mass();
  s.c1 = n * in.measure / m_min;
  const double budget = in.entropy0 + s.c1;
  if (!(budget > 0.0)) throw InvalidInput("schedule: H(rho^0) + C1 must be positive");
  const double sqrt_eps = g * in.masses0.head(n).minCoeff() / std::sqrt(in.t_end * in.measure * budget);
  s.epsilon = sqrt_eps * sqrt_eps;
  const double h = g / (2.0 * s.gamma0);
  s.c2 = in.measure / m_min *
         std::log((1.0 + s.m0 * g) * (1.0 + g) * (1.0 + h) /
                  ((1.0 - s.m0 * g) * (1.0 - g) * (1.0 - h)));
  s.c3 = in.measure / m_min * std::log((1.0 + g) * (1.0 + h) / (1.0 - s.m0 * g));
  const double k = m_min / (m_max * m_max / (m_min * m_min) + 1.0);
  s.c_gamma = s.c2 + 0.5 * s.c3 / in.log_sobolev_constant * k;
  const double tau = std::sqrt(s.c_gamma);
  s.steps = std::max(1, static_cast<int>(std::ceil(in.t_end / tau - 1e-9)));
  s.tau = in.t_end / s.steps;
  return s;
}

// ---------------------------------------------------------------------------
// Runs

namespace {

MatrixXd initial_density(const RunConfig& cfg, const Grid& grid) {
  const int n1 = cfg.n_species;
  const int n = n1 - 1;
  VectorXd base(n1);
  if (cfg.base_composition.empty()) base.setConstant(1.0 / n1);
  else base = Eigen::Map<const VectorXd>(cfg.base_composition.data(), n1);

  const int ncell = grid.cell_count();
  MatrixXd rho(n1, ncell);
  auto coord = [&](int axis, int k) {
    const int idx = axis == 0 ? k % grid.nx() : k / grid.nx();
    return grid.center(axis, idx);
  };

  if (cfg.scenario == "uniform") {
    rho = base.replicate(1, ncell);
  } else if (cfg.scenario == "cosine") {
    VectorXd pert(n1);
    if (cfg.perturbation.empty()) {
      pert.setZero();
      pert(0) = 1.0;
      pert(n) = -1.0;
    } else {
      pert = Eigen::Map<const VectorXd>(cfg.perturbation.data(), n1);
    }
    for (int k = 0; k < ncell; ++k) {
      double phi = 1.0;
      for (int a = 0; a < grid.dim(); ++a) {
        const int mode = cfg.modes.empty() ? 1 : cfg.modes[a];
        phi *= std::cos(mode * std::numbers::pi * coord(a, k) / grid.extent(a));
      }
      rho.col(k) = base + cfg.amplitude * phi * pert;
    }
  } else {  // random: a few smooth cosine modes with random coefficients per species
    std::mt19937_64 gen(cfg.seed);
    std::uniform_real_distribution<double> coef(-1.0, 1.0);
    const int kmax = cfg.modes.empty() ? 3 : cfg.modes[0];
    MatrixXd phi = MatrixXd::Zero(n, ncell);
    for (int i = 0; i < n; ++i) {
      const int ky = grid.dim() == 2 ? kmax : 0;
      for (int my = 0; my <= ky; ++my) {
        for (int mx = 0; mx <= kmax; ++mx) {
          if (mx == 0 && my == 0) continue;
          const double a = coef(gen) / (mx + my);
          for (int k = 0; k < ncell; ++k) {
            double v = std::cos(mx * std::numbers::pi * coord(0, k) / grid.extent(0));
            if (grid.dim() == 2) v *= std::cos(my * std::numbers::pi * coord(1, k) / grid.extent(1));
            phi(i, k) += a * v;
          }
        }
      }
      const double peak = phi.row(i).cwiseAbs().maxCoeff();
      if (peak > 0.0) phi.row(i) /= peak;
    }
    for (int k = 0; k < ncell; ++k) {
      rho.col(k).head(n) = base.head(n) + cfg.amplitude * phi.col(k);
      rho(n, k) = 1.0 - rho.col(k).head(n).sum();
    }
  }

  for (int k = 0; k < ncell; ++k) {
    for (int i = 0; i < n1; ++i) {
      if (!(rho(i, k) > 0.0 && rho(i, k) < 1.0)) {
        std::ostringstream os;
        os << "initial density rho_" << i + 1 << " = " << rho(i, k) << " at cell " << k
           << " is outside (0,1); reduce amplitude";
        throw ConfigError(os.str());
      }
    }
  }
  return rho;
}

VelocityField initial_velocity(const RunConfig& cfg, const Grid& grid) {
  if (cfg.velocity != "vortex" || grid.dim() != 2) return VelocityField::zero(grid);
  const double a = cfg.velocity_amplitude;
  const double lx = grid.extent(0), ly = grid.extent(1);
  return VelocityField::from_stream_function(
      [=](double x, double y) {
        const double sx = std::sin(std::numbers::pi * x / lx);
        const double sy = std::sin(std::numbers::pi * y / ly);
        return a * sx * sx * sy * sy;
      },
      grid);
}

MsOptions ms_options(const RunConfig& cfg) {
  MsOptions o;
  o.newton_tol = cfg.newton_tol;
  o.fixed_point.tolerance = cfg.fixedpoint_tol;
  return o;
}

}  // namespace

SimulationSetup build_setup(const RunConfig& cfg) {
  Grid grid = cfg.dimension == 1
                  ? Grid::line(cfg.lengths.at(0), cfg.cells.at(0))
                  : Grid::rectangle(cfg.lengths.at(0), cfg.lengths.at(1), cfg.cells.at(0),
                                    cfg.cells.at(1));
  const double tau_hint = cfg.tau > 0.0 ? cfg.tau : cfg.t_end;
  MixtureParams params =
      MixtureParams::from_upper_triangle(cfg.molar_masses, cfg.diffusivities, cfg.epsilon, tau_hint);
  MatrixXd rho0 = initial_density(cfg, grid);
  if (cfg.eta0 > 0.0) {
    // Validated here so that `check` reports it; initialize() applies it.
    mollify_initial_density(rho0, cfg.eta0);
  }

  std::optional<GammaSchedule> schedule;
  int steps = 0;
  if (cfg.gamma > 0.0) {
    const MatrixXd rho = cfg.eta0 > 0.0 ? mollify_initial_density(rho0, cfg.eta0) : rho0;
    ScheduleInputs in;
    in.gamma = cfg.gamma;
    in.t_end = cfg.t_end;
    in.measure = grid.measure();
    in.entropy0 = entropy_functional(rho, params, grid);
    in.masses0 = rho.rowwise().sum() * grid.cell_volume();
    double lmax = grid.extent(0);
    if (grid.dim() == 2) lmax = std::max(lmax, grid.extent(1));
    in.log_sobolev_constant = cfg.log_sobolev_constant > 0.0
                                  ? cfg.log_sobolev_constant
                                  : 2.0 * lmax * lmax / (std::numbers::pi * std::numbers::pi);
    schedule = gamma_schedule(in, params);
    params = params.with_epsilon(schedule->epsilon).with_tau(schedule->tau);
    steps = schedule->steps;
  } else {
    steps = std::max(1, static_cast<int>(std::ceil(cfg.t_end / cfg.tau - 1e-9)));
    params = params.with_tau(cfg.t_end / steps);
  }
  VelocityField u0 = initial_velocity(cfg, grid);
  return SimulationSetup{std::move(grid), std::move(params), steps, std::move(rho0),
                         std::move(u0), schedule};
}

RunResult run_simulation(const RunConfig& cfg) {
  SimulationSetup setup = build_setup(cfg);
  NsOptions ns_opt;
  ns_opt.div_tol = cfg.div_tol;
  CoupledSolver solver(setup.params, setup.grid, ms_options(cfg), ns_opt);

  RunResult result;
  result.schedule = setup.schedule;
  result.state = solver.initialize(setup.rho0, setup.u0, cfg.eta0);
  result.history.push_back(solver.diagnose(result.state));

  const bool write = !cfg.output_dir.empty();
  std::ofstream diag;
  const Grid& grid = solver.grid();
  auto snapshot = [&](const CoupledState& s) {
    if (!write) return;
    write_species_snapshot(std::filesystem::path(cfg.output_dir) / snapshot_name(s.step),
                           s.species, grid);
    if (grid.dim() == 2) {
      write_velocity_snapshot(std::filesystem::path(cfg.output_dir) / velocity_snapshot_name(s.step),
                              s.velocity, s.pressure, grid);
    }
  };
  if (write) {
    std::filesystem::create_directories(cfg.output_dir);
    const auto path = std::filesystem::path(cfg.output_dir) / "diagnostics.csv";
    result.diagnostics_path = path.string();
    diag.open(path);
    if (!diag) throw InvalidInput("cannot write " + path.string());
    write_diagnostics_header(diag, setup.params.n_species());
    write_diagnostics_row(diag, result.history.back());
    snapshot(result.state);
  }

  const ForcingField f = ForcingField::zero(grid);
  for (int k = 1; k <= setup.steps; ++k) {
    DiagnosticsRecord rec;
    try {
      CoupledState next = solver.step(result.state, f, &rec);
      result.state = std::move(next);
    } catch (const std::exception& e) {
      result.ok = false;
      result.error = e.what();
      result.failed_step = k;
      snapshot(result.state);
      break;
    }
    result.history.push_back(rec);
    if (write) {
      write_diagnostics_row(diag, rec);
      const bool due = cfg.snapshot_interval > 0 && k % cfg.snapshot_interval == 0;
      if (due || k == setup.steps) snapshot(result.state);
    }
  }
  return result;
}

}  // namespace nsms

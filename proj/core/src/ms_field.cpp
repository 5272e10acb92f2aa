#include "nsms/ms_field.hpp"

#include <Eigen/IterativeLinearSolvers>
#include <Eigen/SparseLU>
#include <cmath>
#include <sstream>
#include <string>
#include <vector>

#include "nsms/errors.hpp"

namespace nsms {

using Eigen::MatrixXd;
using Eigen::SparseMatrix;
using Eigen::VectorXd;

namespace {

using Triplets = std::vector<Eigen::Triplet<double>>;

void require_shape(const MatrixXd& m, Eigen::Index rows, Eigen::Index cols, const char* what) {
  if (m.rows() != rows || m.cols() != cols) {
    std::ostringstream os;
    os << what << ": expected " << rows << "x" << cols << ", got " << m.rows() << "x" << m.cols();
    throw InvalidInput(os.str());
  }
}

bool has_velocity(const VelocityField& u, const Grid& grid) {
  if (u.u.size() == 0 && u.v.size() == 0) return false;
  const Eigen::Index nu = static_cast<Eigen::Index>(grid.nx() + 1) * grid.ny();
  const Eigen::Index nv = grid.dim() == 2 ? static_cast<Eigen::Index>(grid.nx()) * (grid.ny() + 1) : 0;
  if (u.u.size() != nu || u.v.size() != nv) {
    throw InvalidInput("velocity field does not match the grid");
  }
  return (u.u.array() != 0.0).any() || (u.v.array() != 0.0).any();
}

double face_velocity(const VelocityField& u, const Face& f) {
  return f.axis == 0 ? u.u(f.mac_index) : u.v(f.mac_index);
}

// Everything the Newton iteration needs at one iterate.
struct Iterate {
  MatrixXd w;
  MatrixXd r;
  std::vector<detail::PointState> cells;
  std::vector<SpeciesMatrix> face_b;
};

class Discretization {
 public:
  Discretization(const MatrixXd& rho_prev, const VelocityField& u, const MixtureParams& params,
                 const Grid& grid, const FixedPointOptions& fp)
      : rho_prev_(rho_prev),
        u_(u),
        params_(params),
        grid_(grid),
        fp_(fp),
        n_(params.n_reduced()),
        advect_(has_velocity(u, grid)),
        lap_(laplacian_matrix(grid)) {}

  // Fills cells, face_b and r for it.w. Throws ConvergenceError when w is too
  // extreme for the pointwise inversion.
  void evaluate(Iterate& it) const {
    const int ncell = grid_.cell_count();
    const auto& faces = grid_.interior_faces();
    const double tau = params_.tau();
    it.cells.resize(ncell);
    it.face_b.resize(faces.size());
    it.r.resize(n_, ncell);
    for (int k = 0; k < ncell; ++k) {
      it.cells[k] = detail::point_from_w(it.w.col(k), params_, fp_);
      it.r.col(k) = (it.cells[k].rho.head(n_) - rho_prev_.col(k).head(n_)) / tau;
    }
    for (std::size_t fi = 0; fi < faces.size(); ++fi) {
      const Face& f = faces[fi];
      const double h = grid_.spacing(f.axis);
      const SpeciesVector wf = 0.5 * (it.w.col(f.left) + it.w.col(f.right));
      it.face_b[fi] = detail::b_unchecked(detail::point_from_w(wf, params_, fp_), params_);
      const SpeciesVector flux = it.face_b[fi] * (it.w.col(f.right) - it.w.col(f.left)) / (h * h);
      it.r.col(f.left) -= flux;
      it.r.col(f.right) += flux;
      if (advect_) {
        const double vel = face_velocity(u_, f) / h;
        if (vel != 0.0) {
          const SpeciesVector adv =
              0.5 * vel * (it.cells[f.left].rho.head(n_) + it.cells[f.right].rho.head(n_));
          it.r.col(f.left) += adv;
          it.r.col(f.right) -= adv;
        }
      }
    }
    const double eps = params_.epsilon();
    if (eps > 0.0) {
      const MatrixXd lw = lap_ * it.w.transpose();
      const MatrixXd l2w = lap_ * lw;
      it.r += eps * (l2w.transpose() + it.w);
    }
  }

  SparseMatrix<double> jacobian(const Iterate& it) const {
    const int ncell = grid_.cell_count();
    const auto& faces = grid_.interior_faces();
    const double tau = params_.tau();
    Triplets t;
    t.reserve(static_cast<std::size_t>(n_) * n_ * (ncell + 4 * faces.size()));
    auto add_block = [&](int a, int b, const SpeciesMatrix& blk) {
      for (int i = 0; i < n_; ++i) {
        for (int j = 0; j < n_; ++j) {
          if (blk(i, j) != 0.0) t.emplace_back(a * n_ + i, b * n_ + j, blk(i, j));
        }
      }
    };

    std::vector<SpeciesMatrix> hinv(ncell);
    for (int k = 0; k < ncell; ++k) {
      // d rho'/d w is the inverse of the entropy Hessian.
      hinv[k] = detail::hessian_unchecked(it.cells[k], params_).llt().solve(
          SpeciesMatrix::Identity(n_, n_));
      add_block(k, k, hinv[k] / tau);
    }
    for (std::size_t fi = 0; fi < faces.size(); ++fi) {
      const Face& f = faces[fi];
      const double h = grid_.spacing(f.axis);
      const SpeciesMatrix b = it.face_b[fi] / (h * h);
      add_block(f.left, f.left, b);
      add_block(f.right, f.right, b);
      add_block(f.left, f.right, -b);
      add_block(f.right, f.left, -b);
      if (advect_) {
        const double vel = face_velocity(u_, f) / h;
        if (vel != 0.0) {
          const SpeciesMatrix hl = 0.5 * vel * hinv[f.left];
          const SpeciesMatrix hr = 0.5 * vel * hinv[f.right];
          add_block(f.left, f.left, hl);
          add_block(f.left, f.right, hr);
          add_block(f.right, f.left, -hl);
          add_block(f.right, f.right, -hr);
        }
      }
    }
    const double eps = params_.epsilon();
    if (eps > 0.0) {
      SparseMatrix<double> l2 = lap_ * lap_;
      for (int k = 0; k < l2.outerSize(); ++k) {
        for (SparseMatrix<double>::InnerIterator e(l2, k); e; ++e) {
          for (int i = 0; i < n_; ++i) {
            t.emplace_back(static_cast<int>(e.row()) * n_ + i, static_cast<int>(e.col()) * n_ + i,
                           eps * e.value());
          }
        }
      }
      for (int k = 0; k < ncell * n_; ++k) t.emplace_back(k, k, eps);
    }
    SparseMatrix<double> jac(ncell * n_, ncell * n_);
    jac.setFromTriplets(t.begin(), t.end());
    return jac;
  }

  const SparseMatrix<double>& laplacian() const { return lap_; }
  bool advects() const { return advect_; }

 private:
  const MatrixXd& rho_prev_;
  const VelocityField& u_;
  const MixtureParams& params_;
  const Grid& grid_;
  FixedPointOptions fp_;
  int n_;
  bool advect_;
  SparseMatrix<double> lap_;
};

VectorXd solve_linear(const SparseMatrix<double>& a, const VectorXd& b, const Grid& grid,
                      double tol) {
  if (grid.dim() == 2) {
    Eigen::BiCGSTAB<SparseMatrix<double>, Eigen::DiagonalPreconditioner<double>> it;
    it.setTolerance(tol);
    it.setMaxIterations(static_cast<int>(4 * a.rows()));
    it.compute(a);
    VectorXd x = it.solve(b);
    if (it.info() == Eigen::Success && x.allFinite()) return x;
  }
  Eigen::SparseLU<SparseMatrix<double>> lu;
  lu.compute(a);
  if (lu.info() != Eigen::Success) throw ConvergenceError("Newton matrix factorization failed");
  VectorXd x = lu.solve(b);
  if (!x.allFinite()) throw ConvergenceError("Newton linear solve produced non-finite values");
  return x;
}

double max_abs(const MatrixXd& m) { return m.size() ? m.cwiseAbs().maxCoeff() : 0.0; }

double entropy_of(const std::vector<detail::PointState>& cells, double vol) {
  double acc = 0.0;
  for (const auto& s : cells) acc += detail::entropy_unchecked(s);
  return acc * vol;
}

double bww_from_faces(const MatrixXd& w, const std::vector<SpeciesMatrix>& face_b,
                      const Grid& grid) {
  const auto& faces = grid.interior_faces();
  double acc = 0.0;
  for (std::size_t fi = 0; fi < faces.size(); ++fi) {
    const Face& f = faces[fi];
    const SpeciesVector dw = (w.col(f.right) - w.col(f.left)) / grid.spacing(f.axis);
    acc += dw.dot(face_b[fi] * dw);
  }
  return acc * grid.cell_volume();
}

double sqrtx_from_cells(const MatrixXd& x, const Grid& grid) {
  double acc = 0.0;
  for (const Face& f : grid.interior_faces()) {
    const VectorXd d = (x.col(f.right).cwiseSqrt() - x.col(f.left).cwiseSqrt()) /
                       grid.spacing(f.axis);
    acc += d.squaredNorm();
  }
  return acc * grid.cell_volume();
}

double eps_norm_of(const MatrixXd& w, const SparseMatrix<double>& lap, const Grid& grid) {
  const MatrixXd lw = lap * w.transpose();
  return (lw.squaredNorm() + w.squaredNorm()) * grid.cell_volume();
}

double advection_defect_of(const MatrixXd& w, const MatrixXd& rho, const VelocityField& u,
                           const Grid& grid) {
  const int n = static_cast<int>(w.rows());
  double acc = 0.0;
  for (const Face& f : grid.interior_faces()) {
    const double vel = face_velocity(u, f) / grid.spacing(f.axis);
    if (vel == 0.0) continue;
    const VectorXd adv = 0.5 * vel * (rho.col(f.left).head(n) + rho.col(f.right).head(n));
    acc += w.col(f.left).dot(adv) - w.col(f.right).dot(adv);
  }
  return acc * grid.cell_volume();
}

SpeciesFieldState state_from_cells(const MatrixXd& w, const std::vector<detail::PointState>& cells,
                                   double time) {
  const int ncell = static_cast<int>(cells.size());
  const int n1 = static_cast<int>(w.rows()) + 1;
  SpeciesFieldState s;
  s.w = w;
  s.rho.resize(n1, ncell);
  s.x.resize(n1, ncell);
  s.c.resize(ncell);
  for (int k = 0; k < ncell; ++k) {
    s.rho.col(k) = cells[k].rho;
    s.x.col(k) = cells[k].x;
    s.c(k) = cells[k].c;
  }
  s.time = time;
  return s;
}

MsStepResult solve_single(const SpeciesFieldState& prev, const VelocityField& u,
                          const MixtureParams& params, const Grid& grid, const MsOptions& opt,
                          int depth) {
  const double tau = params.tau();
  const double vol = grid.cell_volume();
  Discretization disc(prev.rho, u, params, grid, opt.fixed_point);

  Iterate cur;
  cur.w = prev.w;
  disc.evaluate(cur);
  double res = tau * max_abs(cur.r);
  int iters = 1;

  Iterate trial;
  while (res > opt.newton_tol) {
    if (iters >= opt.max_newton_iterations) {
      std::ostringstream os;
      os.precision(3);
      os << "Newton did not converge in " << opt.max_newton_iterations
         << " iterations (residual " << res << ", tau " << tau << ")";
      throw ConvergenceError(os.str());
    }
    const SparseMatrix<double> jac = disc.jacobian(cur);
    const VectorXd rhs = -Eigen::Map<const VectorXd>(cur.r.data(), cur.r.size());
    const VectorXd delta = solve_linear(jac, rhs, grid, opt.linear_tol);
    const Eigen::Map<const MatrixXd> dw(delta.data(), cur.w.rows(), cur.w.cols());

    const double merit = cur.r.norm();
    double alpha = 1.0;
    bool accepted = false;
    for (int h = 0; h <= opt.max_step_halvings; ++h, alpha *= 0.5) {
      trial.w = cur.w + alpha * dw;
      try {
        disc.evaluate(trial);
      } catch (const ConvergenceError&) {
        continue;
      }
      if (trial.r.norm() < merit) {
        accepted = true;
        break;
      }
    }
    if (!accepted) {
      std::ostringstream os;
      os.precision(3);
      os << "Newton line search failed (residual " << res << ", tau " << tau << ")";
      throw ConvergenceError(os.str());
    }
    std::swap(cur, trial);
    res = tau * max_abs(cur.r);
    ++iters;
  }

  MsStepResult out;
  out.state = state_from_cells(cur.w, cur.cells, prev.time + tau);
  StepStats& st = out.stats;
  st.newton_iters = iters;
  st.final_residual = res;
  st.entropy_before = entropy_functional(prev.rho, params, grid);
  st.entropy_after = entropy_of(cur.cells, vol);
  st.dissipation = bww_from_faces(cur.w, cur.face_b, grid);
  st.dissipation_sqrtx = sqrtx_from_cells(out.state.x, grid);
  st.eps_norm = eps_norm_of(cur.w, disc.laplacian(), grid);
  st.advection_defect =
      disc.advects() ? advection_defect_of(cur.w, out.state.rho, u, grid) : 0.0;
  st.w_integral = cur.w.rowwise().sum() * vol;
  st.step_excess = st.entropy_after + tau * st.dissipation +
                   params.epsilon() * tau * st.eps_norm - st.entropy_before;
  st.tau_halvings = depth;
  st.substeps = 1;
  return out;
}

MsStepResult step_with_rescue(const SpeciesFieldState& prev, const VelocityField& u,
                              const MixtureParams& params, const Grid& grid,
                              const MsOptions& opt, int depth) {
  try {
    return solve_single(prev, u, params, grid, opt, depth);
  } catch (const ConvergenceError& e) {
    if (depth >= opt.max_tau_halvings) {
      throw ConvergenceError(std::string(e.what()) + " after " + std::to_string(depth) +
                             " time-step halvings");
    }
  }
  const MixtureParams half = params.with_tau(0.5 * params.tau());
  MsStepResult a = step_with_rescue(prev, u, half, grid, opt, depth + 1);
  MsStepResult b = step_with_rescue(a.state, u, half, grid, opt, depth + 1);

  MsStepResult out;
  out.state = std::move(b.state);
  StepStats& st = out.stats;
  st.newton_iters = a.stats.newton_iters + b.stats.newton_iters;
  st.final_residual = b.stats.final_residual;
  st.entropy_before = a.stats.entropy_before;
  st.entropy_after = b.stats.entropy_after;
  st.dissipation = 0.5 * (a.stats.dissipation + b.stats.dissipation);
  st.dissipation_sqrtx = 0.5 * (a.stats.dissipation_sqrtx + b.stats.dissipation_sqrtx);
  st.eps_norm = 0.5 * (a.stats.eps_norm + b.stats.eps_norm);
  st.advection_defect = 0.5 * (a.stats.advection_defect + b.stats.advection_defect);
  st.w_integral = 0.5 * (a.stats.w_integral + b.stats.w_integral);
  st.step_excess = st.entropy_after + params.tau() * st.dissipation +
                   params.epsilon() * params.tau() * st.eps_norm - st.entropy_before;
  st.tau_halvings = std::max(a.stats.tau_halvings, b.stats.tau_halvings);
  st.substeps = a.stats.substeps + b.stats.substeps;
  return out;
}

}  // namespace

// ---------------------------------------------------------------------------

SpeciesFieldState SpeciesFieldState::from_w(const MatrixXd& w, const MixtureParams& params,
                                            double time, const FixedPointOptions& fp) {
  if (w.rows() != params.n_reduced()) throw InvalidInput("w field needs N rows");
  if (!w.allFinite()) throw InvalidInput("w field has non-finite entries");
  std::vector<detail::PointState> cells(w.cols());
  for (Eigen::Index k = 0; k < w.cols(); ++k) {
    cells[k] = detail::point_from_w(w.col(k), params, fp);
  }
  return state_from_cells(w, cells, time);
}

SpeciesFieldState SpeciesFieldState::from_rho(const MatrixXd& rho, const MixtureParams& params,
                                              double time, const FixedPointOptions& fp) {
  if (rho.rows() != params.n_species()) throw InvalidInput("rho field needs N+1 rows");
  MatrixXd w(params.n_reduced(), rho.cols());
  for (Eigen::Index k = 0; k < rho.cols(); ++k) {
    try {
      w.col(k) = rho_to_w(rho.col(k), params);
    } catch (const InvalidInput& e) {
      throw InvalidInput("cell " + std::to_string(k) + ": " + e.what());
    }
  }
  return from_w(w, params, time, fp);
}

SparseMatrix<double> laplacian_matrix(const Grid& grid) {
  const int n = grid.cell_count();
  Triplets t;
  t.reserve(4 * grid.interior_faces().size());
  for (const Face& f : grid.interior_faces()) {
    const double h = grid.spacing(f.axis);
    const double k = 1.0 / (h * h);
    t.emplace_back(f.left, f.left, -k);
    t.emplace_back(f.right, f.right, -k);
    t.emplace_back(f.left, f.right, k);
    t.emplace_back(f.right, f.left, k);
  }
  SparseMatrix<double> lap(n, n);
  lap.setFromTriplets(t.begin(), t.end());
  return lap;
}

VectorXd laplacian_neumann(const VectorXd& f, const Grid& grid) {
  if (f.size() != grid.cell_count()) throw InvalidInput("field does not match the grid");
  VectorXd out = VectorXd::Zero(f.size());
  for (const Face& face : grid.interior_faces()) {
    const double h = grid.spacing(face.axis);
    const double flux = (f(face.right) - f(face.left)) / (h * h);
    out(face.left) += flux;
    out(face.right) -= flux;
  }
  return out;
}

VectorXd bilaplacian(const VectorXd& f, const Grid& grid) {
  return laplacian_neumann(laplacian_neumann(f, grid), grid);
}

MatrixXd ms_residual(const MatrixXd& w_next, const MatrixXd& rho_prev, const VelocityField& u,
                     const MixtureParams& params, const Grid& grid, const FixedPointOptions& fp) {
  require_shape(w_next, params.n_reduced(), grid.cell_count(), "ms_residual: w");
  require_shape(rho_prev, params.n_species(), grid.cell_count(), "ms_residual: rho_prev");
  Discretization disc(rho_prev, u, params, grid, fp);
  Iterate it;
  it.w = w_next;
  disc.evaluate(it);
  return it.r;
}

MsStepResult ms_step(const SpeciesFieldState& prev, const VelocityField& u,
                     const MixtureParams& params, const Grid& grid, const MsOptions& options) {
  require_shape(prev.w, params.n_reduced(), grid.cell_count(), "ms_step: w");
  require_shape(prev.rho, params.n_species(), grid.cell_count(), "ms_step: rho");
  return step_with_rescue(prev, u, params, grid, options, 0);
}

double entropy_functional(const MatrixXd& rho, const MixtureParams& params, const Grid& grid) {
  require_shape(rho, params.n_species(), grid.cell_count(), "entropy_functional");
  double acc = 0.0;
  for (Eigen::Index k = 0; k < rho.cols(); ++k) acc += entropy_density(rho.col(k), params);
  return acc * grid.cell_volume();
}

DissipationTerms dissipation_terms(const SpeciesFieldState& state, const MixtureParams& params,
                                   const Grid& grid, const FixedPointOptions& fp) {
  require_shape(state.w, params.n_reduced(), grid.cell_count(), "dissipation_terms");
  const auto& faces = grid.interior_faces();
  std::vector<SpeciesMatrix> face_b(faces.size());
  for (std::size_t fi = 0; fi < faces.size(); ++fi) {
    const SpeciesVector wf = 0.5 * (state.w.col(faces[fi].left) + state.w.col(faces[fi].right));
    face_b[fi] = detail::b_unchecked(detail::point_from_w(wf, params, fp), params);
  }
  return {bww_from_faces(state.w, face_b, grid), sqrtx_from_cells(state.x, grid)};
}

double advection_defect(const SpeciesFieldState& state, const VelocityField& u,
                        const Grid& grid) {
  if (!has_velocity(u, grid)) return 0.0;
  return advection_defect_of(state.w, state.rho, u, grid);
}

VectorXd species_masses(const SpeciesFieldState& state, const Grid& grid) {
  return state.rho.rowwise().sum() * grid.cell_volume();
}

double concentration_mass(const SpeciesFieldState& state, const Grid& grid) {
  return state.c.sum() * grid.cell_volume();
}

}  // namespace nsms

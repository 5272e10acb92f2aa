#include "nsms/ns_field.hpp"

#include <Eigen/SparseCholesky>
#include <Eigen/SparseLU>
#include <cmath>
#include <sstream>
#include <vector>

#include "nsms/errors.hpp"

namespace nsms {

using Eigen::MatrixXd;
using Eigen::SparseMatrix;
using Eigen::VectorXd;

namespace {

using Triplets = std::vector<Eigen::Triplet<double>>;

// Index bookkeeping for the staggered layout; velocity unknowns are stacked
// as [u; v].
struct Mac {
  int nx, ny;
  double hx, hy;

  explicit Mac(const Grid& g)
      : nx(g.nx()), ny(g.ny()), hx(g.spacing(0)), hy(g.dim() == 2 ? g.spacing(1) : 1.0) {}

  int nu() const { return (nx + 1) * ny; }
  int nv() const { return nx * (ny + 1); }
  int nvel() const { return nu() + nv(); }
  int ncell() const { return nx * ny; }
  int iu(int i, int j) const { return i + (nx + 1) * j; }
  int iv(int i, int j) const { return nu() + i + nx * j; }
  int cell(int i, int j) const { return i + nx * j; }
  bool u_wall(int i) const { return i == 0 || i == nx; }
  bool v_wall(int j) const { return j == 0 || j == ny; }
  double vol() const { return hx * hy; }
};

void require_velocity(const VelocityField& u, const Grid& grid, const char* what) {
  const Mac m(grid);
  const Eigen::Index nv = grid.dim() == 2 ? m.nv() : 0;
  if (u.u.size() != m.nu() || u.v.size() != nv) {
    throw InvalidInput(std::string(what) + ": velocity field does not match the grid");
  }
  if (!u.u.allFinite() || !u.v.allFinite()) {
    throw InvalidInput(std::string(what) + ": non-finite velocity");
  }
}

VectorXd stack(const VelocityField& u) {
  VectorXd s(u.u.size() + u.v.size());
  s << u.u, u.v;
  return s;
}

VelocityField unstack(const VectorXd& s, const Mac& m) {
  return {s.head(m.nu()), s.tail(m.nv())};
}

VectorXd stack(const ForcingField& f) {
  VectorXd s(f.fu.size() + f.fv.size());
  s << f.fu, f.fv;
  return s;
}

// No-slip vector Laplacian on interior faces; wall-face rows and columns are
// left empty. Tangential walls use the ghost value -u (zero at the wall).
void add_laplacian(const Mac& m, double scale, Triplets& t) {
  const double kx = scale / (m.hx * m.hx);
  const double ky = scale / (m.hy * m.hy);
  for (int j = 0; j < m.ny; ++j) {
    for (int i = 1; i < m.nx; ++i) {
      const int p = m.iu(i, j);
      t.emplace_back(p, p, -2.0 * kx);
      if (!m.u_wall(i + 1)) t.emplace_back(p, m.iu(i + 1, j), kx);
      if (!m.u_wall(i - 1)) t.emplace_back(p, m.iu(i - 1, j), kx);
      for (int dj : {-1, 1}) {
        const int jn = j + dj;
        if (jn >= 0 && jn < m.ny) {
          t.emplace_back(p, p, -ky);
          t.emplace_back(p, m.iu(i, jn), ky);
        } else {
          t.emplace_back(p, p, -2.0 * ky);
        }
      }
    }
  }
  for (int j = 1; j < m.ny; ++j) {
    for (int i = 0; i < m.nx; ++i) {
      const int p = m.iv(i, j);
      t.emplace_back(p, p, -2.0 * ky);
      if (!m.v_wall(j + 1)) t.emplace_back(p, m.iv(i, j + 1), ky);
      if (!m.v_wall(j - 1)) t.emplace_back(p, m.iv(i, j - 1), ky);
      for (int di : {-1, 1}) {
        const int in = i + di;
        if (in >= 0 && in < m.nx) {
          t.emplace_back(p, p, -kx);
          t.emplace_back(p, m.iv(in, j), kx);
        } else {
          t.emplace_back(p, p, -2.0 * kx);
        }
      }
    }
  }
}

// Skew-symmetric convection (a . grad) on the velocity control volumes with
// central face averages. For discretely divergence-free a the matrix is
// antisymmetric, so it does no work.
void add_convection(const Mac& m, const VelocityField& a, Triplets& t) {
  const double inv2v = 0.5 / m.vol();
  auto au = [&](int i, int j) { return a.u(m.iu(i, j)); };
  auto av = [&](int i, int j) { return a.v(m.iv(i, j) - m.nu()); };
  auto emit = [&](int row, int col, double val) {
    if (val != 0.0) t.emplace_back(row, col, val);
  };
  for (int j = 0; j < m.ny; ++j) {
    for (int i = 1; i < m.nx; ++i) {
      const int p = m.iu(i, j);
      const double fe = 0.5 * (au(i, j) + au(i + 1, j)) * m.hy;
      const double fw = 0.5 * (au(i - 1, j) + au(i, j)) * m.hy;
      const double fn = 0.5 * (av(i - 1, j + 1) + av(i, j + 1)) * m.hx;
      const double fs = 0.5 * (av(i - 1, j) + av(i, j)) * m.hx;
      emit(p, p, (fe - fw + fn - fs) * inv2v);
      if (!m.u_wall(i + 1)) emit(p, m.iu(i + 1, j), fe * inv2v);
      if (!m.u_wall(i - 1)) emit(p, m.iu(i - 1, j), -fw * inv2v);
      if (j + 1 < m.ny) emit(p, m.iu(i, j + 1), fn * inv2v);
      if (j > 0) emit(p, m.iu(i, j - 1), -fs * inv2v);
    }
  }
  for (int j = 1; j < m.ny; ++j) {
    for (int i = 0; i < m.nx; ++i) {
      const int p = m.iv(i, j);
      const double fn = 0.5 * (av(i, j) + av(i, j + 1)) * m.hx;
      const double fs = 0.5 * (av(i, j - 1) + av(i, j)) * m.hx;
      const double fe = 0.5 * (au(i + 1, j - 1) + au(i + 1, j)) * m.hy;
      const double fw = 0.5 * (au(i, j - 1) + au(i, j)) * m.hy;
      emit(p, p, (fe - fw + fn - fs) * inv2v);
      if (!m.v_wall(j + 1)) emit(p, m.iv(i, j + 1), fn * inv2v);
      if (!m.v_wall(j - 1)) emit(p, m.iv(i, j - 1), -fs * inv2v);
      if (i + 1 < m.nx) emit(p, m.iv(i + 1, j), fe * inv2v);
      if (i > 0) emit(p, m.iv(i - 1, j), -fw * inv2v);
    }
  }
}

// Divergence restricted to interior faces (wall faces carry zero flux).
SparseMatrix<double> divergence_matrix(const Mac& m) {
  Triplets t;
  for (int j = 0; j < m.ny; ++j) {
    for (int i = 0; i < m.nx; ++i) {
      const int c = m.cell(i, j);
      if (!m.u_wall(i + 1)) t.emplace_back(c, m.iu(i + 1, j), 1.0 / m.hx);
      if (!m.u_wall(i)) t.emplace_back(c, m.iu(i, j), -1.0 / m.hx);
      if (!m.v_wall(j + 1)) t.emplace_back(c, m.iv(i, j + 1), 1.0 / m.hy);
      if (!m.v_wall(j)) t.emplace_back(c, m.iv(i, j), -1.0 / m.hy);
    }
  }
  SparseMatrix<double> d(m.ncell(), m.nvel());
  d.setFromTriplets(t.begin(), t.end());
  return d;
}

SparseMatrix<double> laplacian_matrix(const Mac& m) {
  Triplets t;
  add_laplacian(m, 1.0, t);
  SparseMatrix<double> l(m.nvel(), m.nvel());
  l.setFromTriplets(t.begin(), t.end());
  return l;
}

void add_wall_identity(const Mac& m, double value, Triplets& t) {
  for (int j = 0; j < m.ny; ++j) {
    t.emplace_back(m.iu(0, j), m.iu(0, j), value);
    t.emplace_back(m.iu(m.nx, j), m.iu(m.nx, j), value);
  }
  for (int i = 0; i < m.nx; ++i) {
    t.emplace_back(m.iv(i, 0), m.iv(i, 0), value);
    t.emplace_back(m.iv(i, m.ny), m.iv(i, m.ny), value);
  }
}

void zero_walls(const Mac& m, VectorXd& s) {
  for (int j = 0; j < m.ny; ++j) {
    s(m.iu(0, j)) = 0.0;
    s(m.iu(m.nx, j)) = 0.0;
  }
  for (int i = 0; i < m.nx; ++i) {
    s(m.iv(i, 0)) = 0.0;
    s(m.iv(i, m.ny)) = 0.0;
  }
}

}  // namespace

// ---------------------------------------------------------------------------

VelocityField VelocityField::zero(const Grid& grid) {
  const Mac m(grid);
  return {VectorXd::Zero(m.nu()), VectorXd::Zero(grid.dim() == 2 ? m.nv() : 0)};
}

VelocityField VelocityField::from_stream_function(
    const std::function<double(double, double)>& psi, const Grid& grid) {
  if (grid.dim() != 2) throw InvalidInput("stream functions need a 2D grid");
  const Mac m(grid);
  VelocityField out = zero(grid);
  auto corner = [&](int i, int j) { return psi(i * m.hx, j * m.hy); };
  for (int j = 0; j < m.ny; ++j) {
    for (int i = 1; i < m.nx; ++i) {
      out.u(m.iu(i, j)) = (corner(i, j + 1) - corner(i, j)) / m.hy;
    }
  }
  for (int j = 1; j < m.ny; ++j) {
    for (int i = 0; i < m.nx; ++i) {
      out.v(m.iv(i, j) - m.nu()) = -(corner(i + 1, j) - corner(i, j)) / m.hx;
    }
  }
  return out;
}

ForcingField ForcingField::zero(const Grid& grid) {
  const VelocityField z = VelocityField::zero(grid);
  return {z.u, z.v};
}

ForcingField average_forcing(
    const std::function<std::array<double, 2>(double, double, double)>& f, double t0, double t1,
    const Grid& grid) {
  ForcingField out = ForcingField::zero(grid);
  if (grid.dim() != 2) return out;
  const Mac m(grid);
  const double mid = 0.5 * (t0 + t1);
  const double half = 0.5 * (t1 - t0);
  const double node = std::sqrt(0.6);
  const std::array<double, 3> ts{mid - node * half, mid, mid + node * half};
  const std::array<double, 3> ws{5.0 / 18.0, 8.0 / 18.0, 5.0 / 18.0};
  for (int q = 0; q < 3; ++q) {
    for (int j = 0; j < m.ny; ++j) {
      for (int i = 1; i < m.nx; ++i) {
        out.fu(m.iu(i, j)) += ws[q] * f(i * m.hx, (j + 0.5) * m.hy, ts[q])[0];
      }
    }
    for (int j = 1; j < m.ny; ++j) {
      for (int i = 0; i < m.nx; ++i) {
        out.fv(m.iv(i, j) - m.nu()) += ws[q] * f((i + 0.5) * m.hx, j * m.hy, ts[q])[1];
      }
    }
  }
  if (!out.fu.allFinite() || !out.fv.allFinite()) throw InvalidInput("non-finite forcing");
  return out;
}

double l2_norm_sq(const VelocityField& u, const Grid& grid) {
  return (u.u.squaredNorm() + u.v.squaredNorm()) * Mac(grid).vol();
}

double kinetic_energy(const VelocityField& u, const Grid& grid) {
  return 0.5 * l2_norm_sq(u, grid);
}

double gradient_norm_sq(const VelocityField& u, const Grid& grid) {
  if (grid.dim() != 2) return 0.0;
  require_velocity(u, grid, "gradient_norm_sq");
  const Mac m(grid);
  const VectorXd s = stack(u);
  return -s.dot(laplacian_matrix(m) * s) * m.vol();
}

double inner(const ForcingField& f, const VelocityField& u, const Grid& grid) {
  return (f.fu.dot(u.u) + f.fv.dot(u.v)) * Mac(grid).vol();
}

VectorXd divergence(const VelocityField& u, const Grid& grid) {
  if (grid.dim() != 2) {
    VectorXd d(grid.cell_count());
    for (int i = 0; i < grid.nx(); ++i) d(i) = (u.u(i + 1) - u.u(i)) / grid.spacing(0);
    return d;
  }
  require_velocity(u, grid, "divergence");
  const Mac m(grid);
  VectorXd d(m.ncell());
  for (int j = 0; j < m.ny; ++j) {
    for (int i = 0; i < m.nx; ++i) {
      d(m.cell(i, j)) = (u.u(m.iu(i + 1, j)) - u.u(m.iu(i, j))) / m.hx +
                        (u.v(m.iv(i, j + 1) - m.nu()) - u.v(m.iv(i, j) - m.nu())) / m.hy;
    }
  }
  return d;
}

double max_abs_divergence(const VelocityField& u, const Grid& grid) {
  return divergence(u, grid).cwiseAbs().maxCoeff();
}

MatrixXd velocity_at_centers(const VelocityField& u, const Grid& grid) {
  const Mac m(grid);
  MatrixXd out(m.ncell(), grid.dim());
  for (int j = 0; j < m.ny; ++j) {
    for (int i = 0; i < m.nx; ++i) {
      const int c = m.cell(i, j);
      out(c, 0) = 0.5 * (u.u(m.iu(i, j)) + u.u(m.iu(i + 1, j)));
      if (grid.dim() == 2) {
        out(c, 1) = 0.5 * (u.v(m.iv(i, j) - m.nu()) + u.v(m.iv(i, j + 1) - m.nu()));
      }
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// NsSolver

struct NsSolver::Impl {
  Mac mac;
  SparseMatrix<double> lap;  // velocity Laplacian
  SparseMatrix<double> div;  // cells x velocity
  Eigen::SimplicialLDLT<SparseMatrix<double>> poisson;  // D D^T + e0 e0^T
  Eigen::SimplicialLDLT<SparseMatrix<double>> neg_lap;  // -L + walls

  explicit Impl(const Grid& g) : mac(g) {
    lap = laplacian_matrix(mac);
    div = divergence_matrix(mac);
    SparseMatrix<double> p = div * SparseMatrix<double>(div.transpose());
    p.coeffRef(0, 0) += 1.0;
    poisson.compute(p);
    if (poisson.info() != Eigen::Success) throw ConvergenceError("pressure Poisson factorization failed");
    Triplets t;
    add_laplacian(mac, -1.0, t);
    add_wall_identity(mac, 1.0, t);
    SparseMatrix<double> k(mac.nvel(), mac.nvel());
    k.setFromTriplets(t.begin(), t.end());
    neg_lap.compute(k);
    if (neg_lap.info() != Eigen::Success) throw ConvergenceError("Laplacian factorization failed");
  }
};

NsSolver::NsSolver(const Grid& grid, NsOptions options) : grid_(grid), options_(options) {
  if (grid.dim() == 2) impl_ = std::make_unique<Impl>(grid);
}
NsSolver::~NsSolver() = default;
NsSolver::NsSolver(NsSolver&&) noexcept = default;
NsSolver& NsSolver::operator=(NsSolver&&) noexcept = default;

VelocityField NsSolver::project(const VelocityField& u) const {
  if (!impl_) return VelocityField::zero(grid_);
  require_velocity(u, grid_, "project");
  const Mac& m = impl_->mac;
  VectorXd s = stack(u);
  zero_walls(m, s);
  // D D^T phi = D u; the source has zero sum because wall fluxes vanish, the
  // mean is removed anyway to absorb roundoff.
  VectorXd rhs = impl_->div * s;
  rhs.array() -= rhs.mean();
  const VectorXd phi = impl_->poisson.solve(rhs);
  s -= impl_->div.transpose() * phi;
  zero_walls(m, s);
  return unstack(s, m);
}

VelocityField NsSolver::smooth(const VelocityField& u0, double tau) const {
  if (!(tau > 0.0)) throw InvalidInput("smoothing needs tau > 0");
  if (!impl_) return VelocityField::zero(grid_);
  require_velocity(u0, grid_, "smooth_initial_velocity");
  const Mac& m = impl_->mac;
  Triplets t;
  add_laplacian(m, -tau, t);
  for (int k = 0; k < m.nvel(); ++k) t.emplace_back(k, k, 1.0);
  SparseMatrix<double> a(m.nvel(), m.nvel());
  a.setFromTriplets(t.begin(), t.end());
  Eigen::SimplicialLDLT<SparseMatrix<double>> solver(a);
  if (solver.info() != Eigen::Success) throw ConvergenceError("smoothing factorization failed");
  VectorXd rhs = stack(u0);
  zero_walls(m, rhs);
  return unstack(solver.solve(rhs), m);
}

double NsSolver::dual_norm_sq(const ForcingField& f) const {
  if (!impl_) return 0.0;
  VectorXd s = stack(f);
  zero_walls(impl_->mac, s);
  if (s.isZero(0.0)) return 0.0;
  return s.dot(impl_->neg_lap.solve(s)) * impl_->mac.vol();
}

NsStepResult NsSolver::step(const VelocityField& u_prev, const ForcingField& f,
                            double tau) const {
  if (!(tau > 0.0)) throw InvalidInput("ns_step needs tau > 0");
  NsStepResult out;
  if (!impl_) {
    out.velocity = VelocityField::zero(grid_);
    out.pressure.p = VectorXd::Zero(grid_.cell_count());
    return out;
  }
  require_velocity(u_prev, grid_, "ns_step");
  if (const double d = max_abs_divergence(u_prev, grid_); d > options_.div_tol) {
    std::ostringstream os;
    os << "ns_step: previous velocity has divergence " << d << " > div_tol";
    throw InvalidInput(os.str());
  }
  const Mac& m = impl_->mac;
  const int nvel = m.nvel();
  const int ncell = m.ncell();

  // Coupled system
  //   [ I/tau + C - L   D^T ] [u]   [u_prev/tau + f]
  //   [ D               0   ] [q] = [0            ],   grad p = -D^T p, q = -p,
  // with the continuity row of cell 0 replaced by q_0 = 0.
  Triplets t;
  t.reserve(static_cast<std::size_t>(nvel) * 12 + static_cast<std::size_t>(ncell) * 8);
  add_laplacian(m, -1.0, t);
  add_convection(m, u_prev, t);
  add_wall_identity(m, 1.0, t);
  for (int j = 0; j < m.ny; ++j) {
    for (int i = 1; i < m.nx; ++i) t.emplace_back(m.iu(i, j), m.iu(i, j), 1.0 / tau);
  }
  for (int j = 1; j < m.ny; ++j) {
    for (int i = 0; i < m.nx; ++i) t.emplace_back(m.iv(i, j), m.iv(i, j), 1.0 / tau);
  }
  for (int k = 0; k < impl_->div.outerSize(); ++k) {
    for (SparseMatrix<double>::InnerIterator e(impl_->div, k); e; ++e) {
      const int row = static_cast<int>(e.row());
      const int col = static_cast<int>(e.col());
      t.emplace_back(col, nvel + row, e.value());
      if (row != 0) t.emplace_back(nvel + row, col, e.value());
    }
  }
  t.emplace_back(nvel, nvel, 1.0);
  SparseMatrix<double> a(nvel + ncell, nvel + ncell);
  a.setFromTriplets(t.begin(), t.end());

  VectorXd rhs = VectorXd::Zero(nvel + ncell);
  VectorXd fs = f.fu.size() ? stack(f) : VectorXd::Zero(nvel);
  if (fs.size() != nvel || !fs.allFinite()) throw InvalidInput("ns_step: forcing does not match the grid");
  rhs.head(nvel) = stack(u_prev) / tau + fs;
  zero_walls(m, rhs);

  Eigen::SparseLU<SparseMatrix<double>> lu;
  lu.compute(a);
  if (lu.info() != Eigen::Success) throw ConvergenceError("ns_step: factorization failed");
  const VectorXd sol = lu.solve(rhs);
  if (!sol.allFinite()) throw ConvergenceError("ns_step: non-finite solution");

  VelocityField star = unstack(sol.head(nvel), m);
  out.velocity = project(star);
  VectorXd p = -sol.tail(ncell);
  p.array() -= p.mean();
  out.pressure.p = p;

  NsStepStats& st = out.stats;
  st.norm_sq_prev = l2_norm_sq(u_prev, grid_);
  st.norm_sq = l2_norm_sq(out.velocity, grid_);
  VelocityField inc{out.velocity.u - u_prev.u, out.velocity.v - u_prev.v};
  st.increment_sq = l2_norm_sq(inc, grid_);
  const VectorXd s = stack(out.velocity);
  st.grad_sq = -s.dot(impl_->lap * s) * m.vol();
  st.forcing_work = fs.dot(s) * m.vol();
  st.max_div = max_abs_divergence(out.velocity, grid_);
  if (st.max_div > options_.div_tol) {
    std::ostringstream os;
    os << "ns_step: divergence " << st.max_div << " exceeds div_tol " << options_.div_tol;
    throw ConvergenceError(os.str());
  }
  return out;
}

VelocityField smooth_initial_velocity(const VelocityField& u0, double tau, const Grid& grid) {
  return NsSolver(grid).smooth(u0, tau);
}

NsStepResult ns_step(const VelocityField& u_prev, const ForcingField& f_k, double tau,
                     const Grid& grid, NsOptions options) {
  return NsSolver(grid, options).step(u_prev, f_k, tau);
}

EnergyReport energy_diagnostics(const std::vector<VelocityField>& u_seq,
                                const std::vector<ForcingField>& f_seq, double tau,
                                const Grid& grid, double rel_tol) {
  EnergyReport report;
  if (u_seq.empty()) return report;
  if (!f_seq.empty() && f_seq.size() + 1 != u_seq.size()) {
    throw InvalidInput("energy_diagnostics: need one forcing per step");
  }
  const NsSolver solver(grid);
  const double u0 = l2_norm_sq(u_seq.front(), grid);
  double increments = 0.0;
  double grads = 0.0;
  double forcing = 0.0;
  for (std::size_t k = 1; k < u_seq.size(); ++k) {
    const VelocityField& cur = u_seq[k];
    const VelocityField& prev = u_seq[k - 1];
    const double norm = l2_norm_sq(cur, grid);
    const double inc = l2_norm_sq({cur.u - prev.u, cur.v - prev.v}, grid);
    const double grad = gradient_norm_sq(cur, grid);
    double work = 0.0;
    if (!f_seq.empty()) {
      work = inner(f_seq[k - 1], cur, grid);
      forcing += solver.dual_norm_sq(f_seq[k - 1]);
    }
    increments += inc;
    grads += grad;

    EnergyStepCheck c;
    c.step = static_cast<int>(k);
    c.lhs = norm + inc + 2.0 * tau * grad;
    c.rhs = l2_norm_sq(prev, grid) + 2.0 * tau * work;
    c.step_ok = c.lhs <= c.rhs + rel_tol * std::max(std::abs(c.rhs), 1e-300);
    c.cumulative_lhs = norm + increments + tau * grads;
    c.cumulative_bound = u0 + tau * forcing;
    c.cumulative_ok =
        c.cumulative_lhs <= c.cumulative_bound + rel_tol * std::max(c.cumulative_bound, 1e-300);
    report.all_ok = report.all_ok && c.step_ok && c.cumulative_ok;
    report.steps.push_back(c);
  }
  return report;
}

}  // namespace nsms

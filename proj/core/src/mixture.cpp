#include "nsms/mixture.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <string>

#include "nsms/errors.hpp"

namespace nsms {

namespace {

constexpr double kSumTolerance = 1e-8;
constexpr double kFractionSumTolerance = 1e-12;

void require_length(const SpeciesVector& v, int expected, const char* what) {
  if (v.size() != expected) {
    std::ostringstream os;
    os << what << ": expected " << expected << " entries, got " << v.size();
    throw InvalidInput(os.str());
  }
}

void require_finite(const SpeciesVector& v, const char* what) {
  if (!v.allFinite()) throw InvalidInput(std::string(what) + ": non-finite entry");
}

// Nonnegative, finite, summing to one.
void require_density(const SpeciesVector& rho, const MixtureParams& p, const char* what) {
  require_length(rho, p.n_species(), what);
  require_finite(rho, what);
  if ((rho.array() < 0.0).any()) throw InvalidInput(std::string(what) + ": negative density");
  if (std::abs(rho.sum() - 1.0) > kSumTolerance) {
    std::ostringstream os;
    os.precision(17);
    os << what << ": densities sum to " << rho.sum() << ", expected 1";
    throw InvalidInput(os.str());
  }
}

// Strictly inside the simplex: every component including the last in (0,1).
void require_interior(const SpeciesVector& rho, const MixtureParams& p, const char* what) {
  require_density(rho, p, what);
  if ((rho.array() <= 0.0).any() || (rho.array() >= 1.0).any()) {
    throw InvalidInput(std::string(what) + ": boundary state (some rho_i is 0 or 1)");
  }
}

void require_fractions(const SpeciesVector& x, const MixtureParams& p, bool strict,
                       const char* what) {
  require_length(x, p.n_species(), what);
  require_finite(x, what);
  const bool bad = strict ? ((x.array() <= 0.0).any() || (x.array() >= 1.0).any())
                          : ((x.array() < 0.0).any() || (x.array() > 1.0).any());
  if (bad) throw InvalidInput(std::string(what) + ": molar fraction out of range");
  if (std::abs(x.sum() - 1.0) > kFractionSumTolerance) {
    throw InvalidInput(std::string(what) + ": molar fractions do not sum to 1");
  }
}

double concentration_unchecked(const SpeciesVector& rho, const SpeciesVector& masses) {
  return (rho.array() / masses.array()).sum();
}

SpeciesMatrix a0_unchecked(const SpeciesVector& rho, double c, const MixtureParams& p) {
  const int n = p.n_reduced();
  const auto& m = p.molar_masses();
  auto d = [&](int i, int j) { return 1.0 / (c * c * m(i) * m(j) * p.diffusivity(i, j)); };
  SpeciesMatrix a0(n, n);
  for (int i = 0; i < n; ++i) {
    const double d_last = d(i, n);
    double diag = d_last;
    for (int j = 0; j < n; ++j) {
      if (j == i) continue;
      const double dij = d(i, j);
      a0(i, j) = -(dij - d_last) * rho(i);
      diag += (dij - d_last) * rho(j);
    }
    a0(i, i) = diag;
  }
  return a0;
}

// G^{-1} = (diag(rho') - rho' rho'^T) / c, from Sherman-Morrison on G.
SpeciesMatrix g_inverse_unchecked(const SpeciesVector& rho, double c, int n) {
  const auto r = rho.head(n);
  SpeciesMatrix ginv = -(r * r.transpose());
  ginv.diagonal() += r;
  return ginv / c;
}

}  // namespace

// ---------------------------------------------------------------------------
// MixtureParams

MixtureParams::MixtureParams(const std::vector<double>& molar_masses,
                             const SpeciesMatrix& diffusivities, double epsilon, double tau)
    : epsilon_(epsilon), tau_(tau) {
  const int n = static_cast<int>(molar_masses.size());
  if (n < 2) throw InvalidInput("mixture needs at least 2 species");
  if (n > kMaxSpecies) {
    throw InvalidInput("mixture supports at most " + std::to_string(kMaxSpecies) + " species");
  }
  masses_.resize(n);
  for (int i = 0; i < n; ++i) {
    if (!(molar_masses[i] > 0.0) || !std::isfinite(molar_masses[i])) {
      throw InvalidInput("molar mass M_" + std::to_string(i + 1) + " must be positive");
    }
    masses_(i) = molar_masses[i];
  }
  if (diffusivities.rows() != n || diffusivities.cols() != n) {
    throw InvalidInput("diffusivity table must be " + std::to_string(n) + "x" +
                       std::to_string(n));
  }
  diffusivities_ = diffusivities;
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      const double dij = diffusivities(i, j);
      if (!(dij > 0.0) || !std::isfinite(dij)) {
        throw InvalidInput("diffusivity D_" + std::to_string(i + 1) + std::to_string(j + 1) +
                           " must be positive");
      }
      if (dij != diffusivities(j, i)) {
        throw InvalidInput("diffusivity table is not symmetric at (" + std::to_string(i + 1) +
                           "," + std::to_string(j + 1) + ")");
      }
    }
  }
  if (!(epsilon >= 0.0) || !std::isfinite(epsilon)) throw InvalidInput("epsilon must be >= 0");
  if (!(tau > 0.0) || !std::isfinite(tau)) throw InvalidInput("tau must be > 0");
  equal_masses_ = (masses_.array() == masses_(0)).all();
}

MixtureParams MixtureParams::from_upper_triangle(const std::vector<double>& molar_masses,
                                                 const std::vector<double>& upper, double epsilon,
                                                 double tau) {
  const int n = static_cast<int>(molar_masses.size());
  const std::size_t expected = static_cast<std::size_t>(n) * (n - 1) / 2;
  if (n < 2 || upper.size() != expected) {
    throw InvalidInput("expected " + std::to_string(expected) + " diffusivities for " +
                       std::to_string(n) + " species, got " + std::to_string(upper.size()));
  }
  SpeciesMatrix d = SpeciesMatrix::Zero(n, n);
  std::size_t k = 0;
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      d(i, j) = upper[k];
      d(j, i) = upper[k];
      ++k;
    }
  }
  return MixtureParams(molar_masses, d, epsilon, tau);
}

MixtureParams MixtureParams::with_tau(double tau) const {
  MixtureParams copy = *this;
  if (!(tau > 0.0) || !std::isfinite(tau)) throw InvalidInput("tau must be > 0");
  copy.tau_ = tau;
  return copy;
}

MixtureParams MixtureParams::with_epsilon(double epsilon) const {
  MixtureParams copy = *this;
  if (!(epsilon >= 0.0) || !std::isfinite(epsilon)) throw InvalidInput("epsilon must be >= 0");
  copy.epsilon_ = epsilon;
  return copy;
}

// ---------------------------------------------------------------------------
// Composition

Composition Composition::from_rho(const SpeciesVector& rho, const MixtureParams& params) {
  Composition out;
  out.rho = rho;
  out.c = molar_concentration(rho, params);
  out.x = (rho.array() / (out.c * params.molar_masses().array())).matrix();
  return out;
}

Composition Composition::from_w(const SpeciesVector& w, const MixtureParams& params) {
  require_length(w, params.n_reduced(), "entropy variables");
  require_finite(w, "entropy variables");
  auto s = detail::point_from_w(w, params);
  return Composition{s.rho, s.c, s.x};
}

// ---------------------------------------------------------------------------
// Conversions

double molar_concentration(const SpeciesVector& rho, const MixtureParams& params) {
  require_density(rho, params, "molar_concentration");
  return concentration_unchecked(rho, params.molar_masses());
}

SpeciesVector rho_to_x(const SpeciesVector& rho, const MixtureParams& params) {
  const double c = molar_concentration(rho, params);
  return (rho.array() / (c * params.molar_masses().array())).matrix();
}

SpeciesVector x_to_rho(const SpeciesVector& x, const MixtureParams& params) {
  require_fractions(x, params, /*strict=*/true, "x_to_rho");
  const double c = 1.0 / params.molar_masses().dot(x);
  return (c * params.molar_masses().array() * x.array()).matrix();
}

SpeciesVector rho_to_w(const SpeciesVector& rho, const MixtureParams& params) {
  require_interior(rho, params, "rho_to_w");
  const auto& m = params.molar_masses();
  const int n = params.n_reduced();
  const double log_c = std::log(concentration_unchecked(rho, m));
  // ln x_i = ln rho_i - ln c - ln M_i, evaluated without forming x.
  auto log_x = [&](int i) { return std::log(rho(i)) - log_c - std::log(m(i)); };
  const double last = log_x(n) / m(n);
  SpeciesVector w(n);
  for (int i = 0; i < n; ++i) w(i) = log_x(i) / m(i) - last;
  return w;
}

SpeciesVector w_to_x(const SpeciesVector& w, const MixtureParams& params,
                     const FixedPointOptions& options) {
  require_length(w, params.n_reduced(), "w_to_x");
  require_finite(w, "w_to_x");
  return detail::point_from_w(w, params, options).x;
}

SpeciesVector w_to_rho(const SpeciesVector& w, const MixtureParams& params,
                       const FixedPointOptions& options) {
  require_length(w, params.n_reduced(), "w_to_rho");
  require_finite(w, "w_to_rho");
  return detail::point_from_w(w, params, options).rho;
}

// ---------------------------------------------------------------------------
// Entropy

double entropy_density(const SpeciesVector& rho, const MixtureParams& params) {
  require_density(rho, params, "entropy_density");
  const auto& m = params.molar_masses();
  const double c = concentration_unchecked(rho, m);
  double acc = 0.0;
  for (int i = 0; i < rho.size(); ++i) {
    const double xi = rho(i) / (c * m(i));
    if (xi > 0.0) acc += xi * (std::log(xi) - 1.0);
    else acc -= xi;  // x ln x -> 0
  }
  return c * acc + c;
}

double entropy_density_mass_form(const SpeciesVector& rho, const MixtureParams& params) {
  require_density(rho, params, "entropy_density_mass_form");
  const auto& m = params.molar_masses();
  const double c = concentration_unchecked(rho, m);
  double acc = 0.0;
  for (int i = 0; i < rho.size(); ++i) {
    const double ci = rho(i) / m(i);
    acc += ci > 0.0 ? ci * (std::log(ci) - 1.0) : 0.0;
  }
  return acc - c * (std::log(c) - 1.0);
}

SpeciesMatrix entropy_hessian(const SpeciesVector& rho, const MixtureParams& params) {
  require_interior(rho, params, "entropy_hessian");
  detail::PointState s{rho, {}, concentration_unchecked(rho, params.molar_masses())};
  return detail::hessian_unchecked(s, params);
}

double hessian_minor_bound(const SpeciesVector& rho, const MixtureParams& params, int k) {
  require_interior(rho, params, "hessian_minor_bound");
  const int n = params.n_reduced();
  if (k < 1 || k > n) throw InvalidInput("minor order must lie in [1, N]");
  const auto& m = params.molar_masses();
  const double c = concentration_unchecked(rho, m);
  const double rho_last = rho(n);

  // Products over the leading k densities with one or two indices removed.
  auto prod_except = [&](int skip1, int skip2) {
    double p = 1.0;
    for (int l = 0; l < k; ++l) {
      if (l != skip1 && l != skip2) p *= rho(l);
    }
    return p;
  };
  double pairs = 0.0;
  for (int i = 0; i < k; ++i) {
    for (int j = i + 1; j < k; ++j) pairs += 1.0 / (rho_last * prod_except(i, j));
  }
  double singles = 0.0;
  for (int j = 0; j < k; ++j) singles += 1.0 / prod_except(j, -1);

  double mass_prod = 1.0;
  for (int l = 0; l < k; ++l) mass_prod *= m(l);
  return 2.0 / (c * m(n) * mass_prod) * (pairs + singles);
}

// ---------------------------------------------------------------------------
// Matrices

SpeciesMatrix matrix_A(const SpeciesVector& rho, const MixtureParams& params) {
  require_density(rho, params, "matrix_A");
  const auto& m = params.molar_masses();
  const int n1 = params.n_species();
  const double c = concentration_unchecked(rho, m);
  SpeciesMatrix a(n1, n1);
  for (int i = 0; i < n1; ++i) {
    double diag = 0.0;
    for (int j = 0; j < n1; ++j) {
      if (j == i) continue;
      const double dij = 1.0 / (c * c * m(i) * m(j) * params.diffusivity(i, j));
      a(i, j) = dij * rho(i);
      diag -= dij * rho(j);
    }
    a(i, i) = diag;
  }
  return a;
}

SpeciesMatrix matrix_A0(const SpeciesVector& rho, const MixtureParams& params) {
  require_density(rho, params, "matrix_A0");
  return a0_unchecked(rho, concentration_unchecked(rho, params.molar_masses()), params);
}

SpeciesMatrix matrix_G(const SpeciesVector& rho, const MixtureParams& params) {
  require_interior(rho, params, "matrix_G");
  const int n = params.n_reduced();
  const double c = concentration_unchecked(rho, params.molar_masses());
  SpeciesMatrix g = SpeciesMatrix::Constant(n, n, c / rho(n));
  for (int i = 0; i < n; ++i) g(i, i) += c / rho(i);
  return g;
}

SpeciesMatrix drho_dx(const SpeciesVector& x, const MixtureParams& params) {
  require_fractions(x, params, /*strict=*/false, "drho_dx");
  const auto& m = params.molar_masses();
  const int n = params.n_reduced();
  const double c = 1.0 / m.dot(x);
  SpeciesMatrix j(n, n);
  for (int i = 0; i < n; ++i) {
    for (int k = 0; k < n; ++k) {
      j(i, k) = (i == k ? c * m(i) : 0.0) - c * c * m(i) * x(i) * (m(k) - m(n));
    }
  }
  return j;
}

SpeciesMatrix matrix_B(const SpeciesVector& rho, const MixtureParams& params) {
  require_interior(rho, params, "matrix_B");
  detail::PointState s{rho, {}, concentration_unchecked(rho, params.molar_masses())};
  return detail::b_unchecked(s, params);
}

SpeciesFlux ms_flux(const SpeciesVector& rho, const SpeciesGradient& grad_x,
                    const MixtureParams& params) {
  require_interior(rho, params, "ms_flux");
  if (grad_x.rows() != params.n_reduced()) throw InvalidInput("ms_flux: gradient needs N rows");
  if (!grad_x.allFinite()) throw InvalidInput("ms_flux: non-finite gradient");
  const double c = concentration_unchecked(rho, params.molar_masses());
  const SpeciesMatrix a0 = a0_unchecked(rho, c, params);
  Eigen::PartialPivLU<SpeciesMatrix> lu(a0);
  SpeciesFlux out;
  out.j_prime = -lu.solve(grad_x);
  if (!out.j_prime.allFinite()) throw ConvergenceError("ms_flux: A0 is numerically singular");
  return out;
}

// ---------------------------------------------------------------------------
// Kernels

namespace detail {

PointState point_from_w(const SpeciesVector& w, const MixtureParams& params,
                        const FixedPointOptions& options) {
  const auto& m = params.molar_masses();
  const int n = params.n_reduced();
  PointState s;
  s.x.resize(n + 1);

  if (params.equal_masses()) {
    // Closed form x_i = exp(M w_i) / (1 + sum_j exp(M w_j)), via log-sum-exp.
    const double mm = m(0);
    double shift = 0.0;
    for (int i = 0; i < n; ++i) shift = std::max(shift, mm * w(i));
    double denom = std::exp(-shift);
    for (int i = 0; i < n; ++i) {
      s.x(i) = std::exp(mm * w(i) - shift);
      denom += s.x(i);
    }
    s.x(n) = std::exp(-shift);
    s.x /= denom;
  } else {
    // Unknown u = ln x_{N+1} = ln(1 - s). The residual
    //   phi(u) = sum_i exp(a_i u + b_i) + exp(u) - 1  (= f(s) - s)
    // is increasing and convex in u, so Newton from the right of the root is
    // monotone; the bracket guards against roundoff.
    SpeciesVector a(n), b(n);
    for (int i = 0; i < n; ++i) {
      a(i) = m(i) / m(n);
      b(i) = m(i) * w(i);
    }
    auto phi = [&](double u, double* dphi) {
      double val = std::exp(u) - 1.0;
      double der = std::exp(u);
      for (int i = 0; i < n; ++i) {
        const double t = std::exp(a(i) * u + b(i));
        val += t;
        der += a(i) * t;
      }
      if (dphi) *dphi = der;
      return val;
    };

    double hi = 0.0;
    for (int i = 0; i < n; ++i) hi = std::min(hi, -b(i) / a(i));
    constexpr double kLowestLog = -700.0;
    double step = 1.0;
    double lo = hi - step;
    int evals = 0;
    while (phi(lo, nullptr) >= 0.0) {
      step *= 2.0;
      lo = hi - step;
      if (lo < kLowestLog || ++evals > options.max_iterations) {
        throw ConvergenceError("w_to_x: could not bracket the fixed point (w too extreme)");
      }
    }

    double u = hi;
    double dphi = 0.0;
    double val = phi(u, &dphi);
    bool converged = std::abs(val) <= options.tolerance;
    for (int it = 0; !converged && it < options.max_iterations; ++it) {
      double next = u - val / dphi;
      if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
      u = next;
      val = phi(u, &dphi);
      if (val > 0.0) hi = u;
      else lo = u;
      converged = std::abs(val) <= options.tolerance;
      if (!converged && hi - lo <= 4.0 * std::numeric_limits<double>::epsilon() * std::abs(u)) {
        // Bracket collapsed to adjacent doubles; accept when roundoff-limited.
        converged = std::abs(val) <= std::max(options.tolerance, 1e-12);
        if (!converged) break;
      }
    }
    if (!converged) {
      throw ConvergenceError("w_to_x: fixed-point iteration did not reach tolerance");
    }
    for (int i = 0; i < n; ++i) s.x(i) = std::exp(a(i) * u + b(i));
    s.x(n) = std::exp(u);
  }

  s.c = 1.0 / m.dot(s.x);
  s.rho = (s.c * m.array() * s.x.array()).matrix();
  return s;
}

SpeciesMatrix hessian_unchecked(const PointState& s, const MixtureParams& params) {
  const auto& m = params.molar_masses();
  const int n = params.n_reduced();
  const double last = 1.0 / (m(n) * s.rho(n));
  SpeciesMatrix h(n, n);
  for (int i = 0; i < n; ++i) {
    const double di = 1.0 / m(i) - 1.0 / m(n);
    for (int j = 0; j < n; ++j) {
      const double dj = 1.0 / m(j) - 1.0 / m(n);
      h(i, j) = last - di * dj / s.c;
    }
    h(i, i) += 1.0 / (m(i) * s.rho(i));
  }
  return h;
}

SpeciesMatrix b_unchecked(const PointState& s, const MixtureParams& params) {
  const int n = params.n_reduced();
  const SpeciesMatrix a0 = a0_unchecked(s.rho, s.c, params);
  const SpeciesMatrix ginv = g_inverse_unchecked(s.rho, s.c, n);
  Eigen::PartialPivLU<SpeciesMatrix> lu(a0);
  SpeciesMatrix b = lu.solve(ginv);
  if (!b.allFinite()) throw ConvergenceError("matrix_B: A0 is numerically singular");
  return b;
}

double entropy_unchecked(const PointState& s) {
  double acc = 0.0;
  for (int i = 0; i < s.x.size(); ++i) acc += s.x(i) * (std::log(s.x(i)) - 1.0);
  return s.c * acc + s.c;
}

}  // namespace detail

}  // namespace nsms

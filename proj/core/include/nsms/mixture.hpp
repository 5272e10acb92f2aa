#pragma once

// Pointwise algebra of an ideal isothermal mixture of N+1 species with
// Maxwell-Stefan diffusion: conversions between mass densities rho, molar
// fractions x and entropy variables w, the entropy density and its Hessian,
// and the reduced N x N diffusion matrices A0, G and B = A0^{-1} G^{-1}.
//
// Index conventions: "full" vectors (rho, x) have n_species = N+1 entries,
// "reduced" vectors (w, rho', x') and all matrices except matrix_A use the
// first N species; the last species is eliminated through sum(rho) = 1.

#include <Eigen/Dense>
#include <vector>

namespace nsms {

inline constexpr int kMaxSpecies = 12;
inline constexpr int kMaxDim = 3;

using SpeciesVector = Eigen::Matrix<double, Eigen::Dynamic, 1, 0, kMaxSpecies, 1>;
using SpeciesMatrix =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, 0, kMaxSpecies, kMaxSpecies>;
/// One row per reduced species, one column per spatial dimension.
using SpeciesGradient =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, 0, kMaxSpecies, kMaxDim>;

/// Species data and the two regularization/time parameters of the scheme.
/// Immutable once constructed; the constructor validates every invariant.
class MixtureParams {
 public:
  /// `diffusivities` is the symmetric (N+1)x(N+1) Maxwell-Stefan table;
  /// its diagonal is ignored.
  MixtureParams(const std::vector<double>& molar_masses, const SpeciesMatrix& diffusivities,
                double epsilon = 0.0, double tau = 1.0);

  /// Builds the diffusivity table from the upper triangle listed row by row:
  /// D_12, D_13, ..., D_1(N+1), D_23, ...
  static MixtureParams from_upper_triangle(const std::vector<double>& molar_masses,
                                           const std::vector<double>& upper, double epsilon = 0.0,
                                           double tau = 1.0);

  int n_species() const { return static_cast<int>(masses_.size()); }
  /// N, the number of independent species.
  int n_reduced() const { return n_species() - 1; }

  const SpeciesVector& molar_masses() const { return masses_; }
  double molar_mass(int i) const { return masses_(i); }
  const SpeciesMatrix& diffusivities() const { return diffusivities_; }
  double diffusivity(int i, int j) const { return diffusivities_(i, j); }
  double epsilon() const { return epsilon_; }
  double tau() const { return tau_; }
  double min_molar_mass() const { return masses_.minCoeff(); }
  double max_molar_mass() const { return masses_.maxCoeff(); }
  bool equal_masses() const { return equal_masses_; }

  MixtureParams with_tau(double tau) const;
  MixtureParams with_epsilon(double epsilon) const;

 private:
  SpeciesVector masses_;
  SpeciesMatrix diffusivities_;
  double epsilon_;
  double tau_;
  bool equal_masses_;
};

/// A pointwise composition with its derived molar quantities.
struct Composition {
  SpeciesVector rho;  // N+1 mass densities, sum 1
  double c = 0.0;     // molar concentration
  SpeciesVector x;    // N+1 molar fractions, sum 1

  static Composition from_rho(const SpeciesVector& rho, const MixtureParams& params);
  static Composition from_w(const SpeciesVector& w, const MixtureParams& params);
};

/// Reduced Maxwell-Stefan fluxes J' (N x d).
struct SpeciesFlux {
  SpeciesGradient j_prime;
};

struct FixedPointOptions {
  double tolerance = 1e-14;
  int max_iterations = 200;
};

double molar_concentration(const SpeciesVector& rho, const MixtureParams& params);
SpeciesVector rho_to_x(const SpeciesVector& rho, const MixtureParams& params);
SpeciesVector x_to_rho(const SpeciesVector& x, const MixtureParams& params);

SpeciesVector rho_to_w(const SpeciesVector& rho, const MixtureParams& params);

/// Inverts w(x') by solving sum_i (1-s)^{M_i/M_{N+1}} exp(M_i w_i) = s for
/// s in (0,1); returns the full molar fraction vector with x_{N+1} = 1 - s.
SpeciesVector w_to_x(const SpeciesVector& w, const MixtureParams& params,
                     const FixedPointOptions& options = {});
SpeciesVector w_to_rho(const SpeciesVector& w, const MixtureParams& params,
                       const FixedPointOptions& options = {});

/// h = c sum_i x_i (ln x_i - 1) + c; accepts zero components (0 ln 0 = 0).
double entropy_density(const SpeciesVector& rho, const MixtureParams& params);
/// The same quantity written in mass densities:
/// sum_i rho_i/M_i (ln(rho_i/M_i) - 1) - c (ln c - 1).
double entropy_density_mass_form(const SpeciesVector& rho, const MixtureParams& params);

/// Hessian of h with respect to rho' (equivalently dw/drho').
SpeciesMatrix entropy_hessian(const SpeciesVector& rho, const MixtureParams& params);
/// Explicit lower bound on the k-th leading principal minor of the Hessian
/// (1 <= k <= N).
double hessian_minor_bound(const SpeciesVector& rho, const MixtureParams& params, int k);

/// Full (N+1)x(N+1) Maxwell-Stefan matrix with grad x = A J.
SpeciesMatrix matrix_A(const SpeciesVector& rho, const MixtureParams& params);
/// Reduced matrix with grad x' = -A0 J'.
SpeciesMatrix matrix_A0(const SpeciesVector& rho, const MixtureParams& params);
/// G = dw/dx'.
SpeciesMatrix matrix_G(const SpeciesVector& rho, const MixtureParams& params);
/// drho'/dx' at the composition with molar fractions x.
SpeciesMatrix drho_dx(const SpeciesVector& x, const MixtureParams& params);
/// B = A0^{-1} G^{-1}; symmetric positive definite.
SpeciesMatrix matrix_B(const SpeciesVector& rho, const MixtureParams& params);

/// J' = -A0^{-1} grad x'.
SpeciesFlux ms_flux(const SpeciesVector& rho, const SpeciesGradient& grad_x,
                    const MixtureParams& params);

namespace detail {

// Unchecked kernels shared with the field solvers. Inputs must already be
// valid interior states.
struct PointState {
  SpeciesVector rho;
  SpeciesVector x;
  double c = 0.0;
};

PointState point_from_w(const SpeciesVector& w, const MixtureParams& params,
                        const FixedPointOptions& options = {});
SpeciesMatrix hessian_unchecked(const PointState& s, const MixtureParams& params);
SpeciesMatrix b_unchecked(const PointState& s, const MixtureParams& params);
double entropy_unchecked(const PointState& s);

}  // namespace detail

}  // namespace nsms

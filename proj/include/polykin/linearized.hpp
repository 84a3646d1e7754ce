#pragma once

#include "polykin/gas_model.hpp"
#include "polykin/quadrature.hpp"

#include <Eigen/Dense>

#include <array>
#include <complex>
#include <cstdint>
#include <functional>
#include <vector>

namespace polykin {

/**
 * Orthonormal Hermite-Laguerre basis e_k = psi_a(v1) psi_b(v2) psi_c(v3) ell_j(I) sqrt(M)
 * with total velocity degree a+b+c <= n_v and Laguerre degree j <= n_i.
 */
struct SpectralBasis {
    int n_v = 0;
    int n_i = 0;
    ModelParams params;
    std::vector<std::array<int, 4>> index; ///< (a, b, c, j) per basis function

    std::size_t size() const { return index.size(); }
    /// Position of (a, b, c, j) or -1 when outside the truncation.
    int find(int a, int b, int c, int j) const;
    /// Polynomial parts p_k(v, I) = e_k / sqrt(M) of all basis functions.
    void values(const Eigen::Vector3d& v, double i, double* out) const;
    /// Coefficients of g sqrt(M) for a polynomial g (exact Gauss projection).
    Eigen::VectorXd project(const std::function<double(const Eigen::Vector3d&, double)>& g) const;
    /// Gram matrix of the basis computed with a tensor Gauss rule.
    Eigen::MatrixXd gram() const;

    std::vector<int> lookup; ///< dense (a, b, c, j) -> position table
};

SpectralBasis build_basis(int n_v, int n_i, const ModelParams& params);

enum class OperatorKind { L, VelocityMultiplication, ModeGenerator };

/// Dense operator in a spectral basis. Mode generators are complex.
struct OperatorMatrix {
    SpectralBasis basis;
    OperatorKind kind = OperatorKind::L;
    Eigen::MatrixXd entries;            ///< real operators
    Eigen::MatrixXcd complex_entries;   ///< mode generators
    Eigen::Vector3i k = Eigen::Vector3i::Zero();
    Eigen::MatrixXd std_error;          ///< Monte Carlo standard error of each entry, for kind L
    Eigen::VectorXd eigenvalues;        ///< ascending, for kind L
    std::int64_t samples = 0;
};

/**
 * Assemble <e_i, L e_j> from the symmetric weak form
 *   (1/4) E[kappa Phi^{1-alpha/2} (Delta p_i)(Delta p_j)],
 * Delta p = p(v') + p(v'*) - p(v) - p(v*), sampled from the collision measure.
 */
OperatorMatrix assemble_L(const SpectralBasis& basis, const QuadratureSpec& quad);

/// Entry-wise comparison of assemble_L against the nu - K2 + K1 route on a leading block.
struct LCrossCheck {
    int block = 0;
    double max_abs_diff = 0.0;
    double max_z = 0.0;       ///< max |A - B| / combined standard error
    double scale = 0.0;       ///< max |A_ij| over the block
    Eigen::MatrixXd route_a;
    Eigen::MatrixXd route_b;
};

LCrossCheck cross_validate_L(const OperatorMatrix& L, int block, const QuadratureSpec& quad);

/// Galerkin matrix <e_i, nu e_j> by tensor Gauss quadrature.
Eigen::MatrixXd assemble_nu(const SpectralBasis& basis, const QuadratureSpec& quad);

/// Spectral norm of the Galerkin K = nu - L.
double k_operator_norm(const OperatorMatrix& L, const QuadratureSpec& quad);

/// Number of eigenvalues below the kernel tolerance.
int kernel_dimension(const OperatorMatrix& L);

/// Smallest eigenvalue on the complement of the 5-dimensional kernel; ModelError otherwise.
double coercivity_gap(const OperatorMatrix& L);

/// Macroscopic coefficients (a, b, c) of the projection onto ker L.
struct MacroCoefficients {
    std::complex<double> a;
    Eigen::Vector3cd b;
    std::complex<double> c;
};

MacroCoefficients macro_extract(const Eigen::VectorXcd& f, const SpectralBasis& basis);
/// Coefficient vector of P1 f.
Eigen::VectorXcd macro_project(const Eigen::VectorXcd& f, const SpectralBasis& basis);
/// Coefficient vectors of sqrt(M), v_i sqrt(M), (|v|^2 + 2I - 3 - delta) sqrt(M).
std::array<Eigen::VectorXd, 5> kernel_vectors(const SpectralBasis& basis);

/// Matrix of multiplication by v_axis (Hermite recurrence, truncated to the basis).
OperatorMatrix velocity_matrix(const SpectralBasis& basis, int axis);

/// G(k) = -(i k.v + L).
OperatorMatrix mode_generator(const Eigen::Vector3i& k, const SpectralBasis& basis, const OperatorMatrix& L,
                              const QuadratureSpec& quad);

/// Complex eigenvalues of a mode generator (or of -L).
Eigen::VectorXcd generator_spectrum(const OperatorMatrix& G);

/// Largest real part of the spectrum.
double spectral_abscissa(const OperatorMatrix& G);

/// Matrix B with E^int(f) = f^H B f for the mode k.
Eigen::MatrixXcd compensator_matrix(const Eigen::Vector3i& k, const SpectralBasis& basis);

/// Re E^int(f) for the mode k.
double compensator_functional(const Eigen::VectorXcd& fhat, const Eigen::Vector3i& k, const SpectralBasis& basis);

/// Weight eps of E = |f|^2 + eps Re E^int with its equivalence constants.
struct LyapunovWeight {
    double eps = 0.0;
    double c1 = 1.0;          ///< E >= c1 |f|^2
    double c2 = 1.0;          ///< E <= c2 |f|^2
    double dissipation = 0.0; ///< largest eigenvalue of the symmetric part of dE/dt (<= 0 when monotone)
    bool dissipative = false;
};

/**
 * Largest eps of the form eps_pd * 2^{-j} that keeps E positive definite
 * (c1 >= 1/2) and makes dE/dt negative semidefinite along G.
 */
LyapunovWeight choose_compensator_weight(const OperatorMatrix& G);

/// E(f) = |f|^2 + eps Re E^int(f).
double lyapunov_functional(const Eigen::VectorXcd& fhat, const Eigen::Vector3i& k, const SpectralBasis& basis,
                           double eps);

} // namespace polykin

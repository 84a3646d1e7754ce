#pragma once

#include <cstdint>
#include <vector>

namespace polykin {

/**
 * Settings for every numerical integral in the library.
 *
 * Deterministic rules are described by node counts, Monte Carlo estimates by
 * sample counts. All random streams are derived from `seed`.
 */
struct QuadratureSpec {
    // collision frequency: radial (generalized Laguerre), polar (Legendre), internal energy
    int nu_radial = 24;
    int nu_polar = 16;
    int nu_internal = 24;

    // pointwise k2: transverse Hermite nodes per axis, parallel nodes, adaptive tolerance
    int k2_transverse = 12;
    int k2_parallel = 24;
    double k2_tol = 1e-7;

    // Monte Carlo sample counts
    std::int64_t mc_samples = 100000;      ///< pointwise collision integrals
    std::int64_t kernel_samples = 200000;  ///< kernel integrals (K_apply, weighted kernel)
    std::int64_t l_samples = 400000;       ///< weak-form assembly of L
    std::int64_t relax_samples = 20000;    ///< homogeneous relaxation, per step
    std::int64_t picard_samples = 64;      ///< Picard gain/loss, per phase node
    std::int64_t gamma_tensor_samples = 4000;

    // phase grid of the torus stepper: Hermite nodes per velocity axis, Laguerre nodes in I
    int grid_velocity = 5;
    int grid_energy = 3;

    // time quadrature for the Picard integral identity
    int time_panels = 8;
    int time_nodes = 3;

    std::uint64_t seed = 20240611ULL;

    void validate() const;
};

/// A one-dimensional quadrature rule: sum_k w_k g(x_k) approximates the weighted integral.
struct Rule {
    std::vector<double> nodes;
    std::vector<double> weights;
    std::size_t size() const { return nodes.size(); }
};

/// Gauss rule for the weight exp(-x^2/2) on the real line (total mass sqrt(2*pi)).
Rule gauss_hermite(int n);

/// Gauss rule for x^a exp(-x) on (0, inf), a > -1 (total mass Gamma(a+1)).
Rule gauss_laguerre(int n, double a);

/// Gauss rule for the unit weight on [-1, 1].
Rule gauss_legendre(int n);

/// Gauss rule for (1-x)^a (1+x)^b on [-1, 1], a, b > -1.
Rule gauss_jacobi(int n, double a, double b);

/// Gauss-Legendre rule affinely mapped to [lo, hi].
Rule gauss_legendre(int n, double lo, double hi);

/// Least-squares slope of y against x.
double fit_slope(const std::vector<double>& x, const std::vector<double>& y);

} // namespace polykin

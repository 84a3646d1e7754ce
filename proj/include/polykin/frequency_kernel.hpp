#pragma once

#include "polykin/gas_model.hpp"
#include "polykin/quadrature.hpp"

namespace polykin {

/// A pair of phase points (v, I), (v*, I*) at which a kernel is evaluated.
struct KernelPoint {
    PhasePoint p;
    PhasePoint p_star;
};

/// Value with an estimated absolute error (quadrature or Monte Carlo standard error).
struct KernelEstimate {
    double value = 0.0;
    double error = 0.0;
};

/**
 * Collision frequency nu(v, I) = kappa * E_M[Phi^{1-alpha/2}], evaluated by a
 * deterministic product rule: generalized Laguerre in |v*|^2/2, Legendre in the
 * polar cosine and generalized Laguerre in I*.
 */
double nu(const PhasePoint& p, const ModelParams& params, const QuadratureSpec& quad);

/// k1 = kappa Phi^{1-alpha/2} sqrt(M M*) (closed form after the (omega, R, r) integral).
double k1(const KernelPoint& kp, const ModelParams& params, const QuadratureSpec& quad);

/// Shape (I*)^{delta/4-1} exp(-|v|^2/16 - |v*|^2/16 - I/8 - I*/8) of the pointwise k1 bound.
double k1_bound_shape(const KernelPoint& kp, const ModelParams& params);

/**
 * Gain kernel k2(v, v*, I, I*) by deterministic quadrature.
 *
 * The partner velocity is shifted so that its Gaussian factor is centred;
 * the two transverse components use a Hermite product rule, the component
 * along v - v* is integrated up to the energy-feasibility limit with a
 * Jacobi rule matched to the endpoint power, and the partner internal energy
 * is integrated adaptively. Throws DomainError when v == v*.
 */
KernelEstimate k2(const KernelPoint& kp, const ModelParams& params, const QuadratureSpec& quad);

/**
 * Integral over (v*, I*) of (k1 + k2) w(v,I)/w(v*,I*) e^{eps|v-v*|^2} (1+I*)^m.
 *
 * k1 + k2 dominates |k|, so this is the conservative form of the weighted
 * kernel integral. Common random numbers make the estimate nondecreasing in
 * eps and m. Throws UsageError outside eps in [0, 1/64], m in [0, 1/8].
 */
KernelEstimate kw_weighted_integral(const PhasePoint& p, double eps, double m, const ModelParams& params,
                                    const QuadratureSpec& quad);

/// (K f)(v, I) with K = K2 - K1; with `weighted`, returns w K(f / w).
KernelEstimate K_apply(const PhaseFunction& f, const PhasePoint& p, bool weighted, const ModelParams& params,
                       const QuadratureSpec& quad);

} // namespace polykin

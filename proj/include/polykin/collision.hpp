#pragma once

#include "polykin/gas_model.hpp"
#include "polykin/grid.hpp"
#include "polykin/quadrature.hpp"
#include "polykin/rng.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <vector>

namespace polykin {

/// Colliding states (v, I) and (v*, I*).
struct CollisionPair {
    PhasePoint p;
    PhasePoint p_star;
};

/// Borgnakke-Larsen parameters: direction omega, kinetic fraction R, internal split r.
struct CollisionParams {
    Eigen::Vector3d omega = Eigen::Vector3d::UnitX();
    double r_frac = 0.5;
    double r_split = 0.5;
};

/// Post-collision states. Internal energies may be 0 at boundary parameters.
struct PostCollisionState {
    PhasePoint p_prime;
    PhasePoint p_star_prime;
};

/// Phi = |v - v*|^2 / 4 + I + I*.
double total_energy_phi(const CollisionPair& pair);

/// B = c_sigma Phi^{1 - alpha/2}.
double cross_section_b(const CollisionPair& pair, const ModelParams& params);

/// Post-collision map with R read as |v' - v'*|^2 / (4 Phi).
PostCollisionState post_collision(const CollisionPair& pair, const CollisionParams& cp);

/**
 * Total mass c_sigma * 4 pi * B(3/2, delta) * B(delta/2, delta/2) of the
 * (omega, R, r) collision measure; nu(v, I) = kappa * E_M[Phi^{1-alpha/2}].
 */
double collision_kappa(const ModelParams& params);

/// Draw (omega, R, r) from the normalized collision measure.
CollisionParams sample_collision_params(RandomStream& rng, const ModelParams& params);

/**
 * One draw of the full collision measure
 *   M(v,I) M(v*,I*) dv dI dv* dI* (omega, R, r probability),
 * together with the pre- and post-collision states and the rate
 * kappa * Phi^{1-alpha/2}.
 */
struct MeasureSample {
    Eigen::Vector3d v, vs, vp, vsp;
    double i = 0.0, is = 0.0, ip = 0.0, isp = 0.0;
    double rate = 0.0;
};

MeasureSample sample_collision_measure(RandomStream& rng, const ModelParams& params, double kappa);

/// A collision-measure state with its quadrature weight (rate included).
struct WeightedMeasureSample {
    MeasureSample s;
    double weight = 0.0;
};

/**
 * Stratified rule for the collision measure.
 *
 * Under M x M the centre of mass V ~ N(0, I/2) and the total energy
 * Phi ~ Gamma(3/2 + delta) are independent of the energy fractions and
 * directions. V is integrated by an n_hermite^3 Gauss-Hermite rule and Phi by an
 * n_phi-point generalized Laguerre rule with the rate folded into its weight;
 * the bounded variables get `per_node` Monte Carlo draws per node. Node n uses
 * the stream block_seed(seed, tag, n * replicas + replica). Samples are stored
 * node by node, so sum_s weight_s g(s) estimates E[rate g].
 */
std::vector<WeightedMeasureSample> stratified_collision_rule(const ModelParams& params, int n_hermite, int n_phi,
                                                             std::int64_t per_node, std::uint64_t seed,
                                                             std::uint64_t tag, int replica = 0, int replicas = 1);

/// Number of (V, Phi) nodes of stratified_collision_rule.
inline std::size_t stratified_node_count(int n_hermite, int n_phi)
{
    return std::size_t(n_hermite) * std::size_t(n_hermite) * std::size_t(n_hermite) * std::size_t(n_phi);
}

/// Monte Carlo estimate of a gain/loss collision integral.
struct CollisionEstimate {
    double value = 0.0;
    double std_error = 0.0;
    double gain = 0.0;
    double gain_error = 0.0;
    double loss = 0.0;
    double loss_error = 0.0;
    std::int64_t samples = 0;
};

/**
 * Q(F, G)(v, I) by Monte Carlo with (v*, I*) drawn from M and (omega, R, r)
 * from the collision measure. Gain and loss share one sample stream.
 */
CollisionEstimate q_apply(const PhaseFunction& F, const PhaseFunction& G, const PhasePoint& p,
                          const ModelParams& params, const QuadratureSpec& quad);

/// Gamma(f, g)(v, I) = Q(sqrt(M) f, sqrt(M) g) / sqrt(M)(v, I).
CollisionEstimate gamma_apply(const PhaseFunction& f, const PhaseFunction& g, const PhasePoint& p,
                              const ModelParams& params, const QuadratureSpec& quad);

/// H = integral of F log(F / I^{delta/2-1}) over the grid (all cells).
double entropy_h(const DistributionGrid& F, const ModelParams& params);

/// Closed form of H(M).
double entropy_maxwellian(const ModelParams& params);

} // namespace polykin

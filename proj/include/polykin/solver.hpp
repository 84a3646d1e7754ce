#pragma once

#include "polykin/gas_model.hpp"
#include "polykin/grid.hpp"
#include "polykin/linearized.hpp"
#include "polykin/quadrature.hpp"

#include <Eigen/Dense>

#include <complex>
#include <cstdint>
#include <vector>

namespace polykin {

// ---------------------------------------------------------------- Picard sequence

/// T1 = 1 / (8 c1 (1 + |w f0|_inf)).
double t1_horizon(double f0_norm, double c1);

struct IterationReport {
    int n = 0;
    double sup_norm = 0.0;   ///< max over grid and time nodes of |w f^n|
    double diff_norm = 0.0;  ///< max of |sqrt(w) (f^n - f^{n-1})|, 0 for n = 0
    double ratio = 0.0;      ///< diff_norm(n) / diff_norm(n-1)
    bool has_ratio = false;  ///< for n >= 2 while diff_norm(n-1) exceeds 1e-12 sup_norm
    double min_F = 0.0;      ///< smallest nodal value of F^n
};

/**
 * Iterates of the gain/loss approximation sequence for a homogeneous f0
 * (values of `f0` are the perturbation f at the phase nodes).
 *
 * F^{n+1}(t) = e^{-G(t)} F0 + int_0^t e^{-(G(t)-G(s))} Q+(F^n, F^n)(s) ds with
 * G' = g^n the loss frequency of F^n. The loss frequency and gain term use the
 * same Monte Carlo samples per phase node in every iteration, so F^n = M is an
 * exact fixed point of the discrete map.
 *
 * Throws NumericError if some F^n turns negative below -1e-12.
 */
std::vector<IterationReport> picard_iterate(const DistributionGrid& f0, double T, int n_iters,
                                            const ModelParams& params, const QuadratureSpec& quad);

// ---------------------------------------------------------------- homogeneous relaxation

struct RelaxRecord {
    double t = 0.0;
    DefectMoments defects;        ///< relative to M, in absolute units
    double entropy = 0.0;
    double entropy_error = 0.0;   ///< error estimate of the entropy change over the preceding step
    double distance = 0.0;        ///< weighted L2 distance to the moment-matched Maxwellian
    double noise_floor = 0.0;     ///< offset that the current estimator error can hold: |SE(dc/dt)| / nu_min
};

struct RelaxResult {
    std::vector<RelaxRecord> records;
    DistributionGrid final_state;
    double nu_max = 0.0;
};

/// Largest dt nu_max accepted by homogeneous_relax.
inline constexpr double kRelaxStabilityCap = 1.0;

/**
 * Galerkin RK2 integration of dF/dt = Q(F, F) on the tensor modal space of the
 * grid. The collision term uses the symmetric weak form on one stratified
 * sample set shared by all steps and stages. Throws ConfigError when
 * dt * nu_max exceeds kRelaxStabilityCap, UsageError for a non-homogeneous or
 * negative F0 and NumericError if a nodal value turns nonpositive.
 */
RelaxResult homogeneous_relax(const DistributionGrid& F0, double dt, int n_steps, const ModelParams& params,
                              const QuadratureSpec& quad);

/// Moment-matched Maxwellian (density, bulk velocity, temperature) of F at (v, I).
struct MaxwellianFit {
    double density = 1.0;
    Eigen::Vector3d velocity = Eigen::Vector3d::Zero();
    double temperature = 1.0;
    double operator()(const Eigen::Vector3d& v, double i, const ModelParams& params) const;
};

MaxwellianFit fit_maxwellian(const DistributionGrid& F, const ModelParams& params);

/// Bimodal-in-v, Gamma-in-I initial distribution with the moments of M, projected on the modal space.
DistributionGrid bimodal_initial(const PhaseGrid& phase, double separation);

// ---------------------------------------------------------------- linear modes

struct DecayRecord {
    Eigen::Vector3i k = Eigen::Vector3i::Zero();
    std::vector<double> times;
    std::vector<double> norms;
    std::vector<double> lyapunov;     ///< E(f(t)) with the chosen compensator weight (k != 0)
    double fitted_rate = 0.0;         ///< -slope of log |f| over the late window
    double spectral_abscissa = 0.0;   ///< of G(k); for k = 0 restricted to the kernel complement
    double eps = 0.0;
    bool lyapunov_monotone = true;
};

/**
 * Integrate df/dt = G(k) f by repeated exact propagators exp(G dt) and fit the
 * decay rate over the second half of [0, t_end]. For k = 0 the data must be
 * orthogonal to the kernel; otherwise PreconditionError.
 */
DecayRecord linear_mode_evolve(const Eigen::Vector3i& k, const Eigen::VectorXcd& fhat0, double t_end,
                               const SpectralBasis& basis, const OperatorMatrix& Lmat, int n_samples = 400);

// ---------------------------------------------------------------- torus mild stepping

/**
 * Mild-form stepper for h = w f on a torus lattice (or a homogeneous grid).
 *
 * One step is h <- e^{-nu dt} T h + phi1(nu dt) dt T S with T the periodic
 * trilinear shift x -> x - v dt and S = w (K f + Gamma(f, f)) evaluated from
 * the Hermite-Laguerre projection of f = h / w. After the step the collision
 * invariants of the total perturbation are restored to their initial values.
 */
class MildStepper {
public:
    MildStepper(const PhaseGrid& phase, const SpectralBasis& basis, const OperatorMatrix& L,
                const QuadratureSpec& quad);

    /// Advance h by dt in place.
    void step(DistributionGrid& h, double dt) const;

    /// Largest |h| over the grid.
    static double sup_norm(const DistributionGrid& h);
    /// (mass, momentum, energy) of sqrt(M) f summed over the torus, f = h / w.
    DefectMoments defects(const DistributionGrid& h) const;
    const Eigen::MatrixXd& k_matrix() const { return k_gal_; }
    const Eigen::MatrixXd& gamma_tensor() const { return gamma_; }

private:
    Eigen::VectorXd source_coefficients(const Eigen::VectorXd& c) const;
    void transport(const DistributionGrid& in, double dt, DistributionGrid& out) const;
    void restore_invariants(DistributionGrid& h, const Eigen::VectorXd& target) const;
    Eigen::VectorXd invariant_vector(const DistributionGrid& h) const;

    PhaseGrid phase_;
    SpectralBasis basis_;
    Eigen::MatrixXd project_;     ///< c = project_ * f_nodes (per cell)
    Eigen::MatrixXd reconstruct_; ///< f_nodes = reconstruct_ * c
    Eigen::MatrixXd k_gal_;       ///< Galerkin K = nu - L
    Eigen::MatrixXd gamma_;       ///< gamma_(k, i*nb + j) = <e_k, Gamma(e_i, e_j)> (symmetrized)
    Eigen::VectorXd nu_nodes_;
    Eigen::VectorXd w_nodes_;
    Eigen::MatrixXd invariants_;  ///< nodal values of the five collision invariants times sqrt(M) q_n
    Eigen::Matrix<double, 5, 5> invariant_gram_;
};

/// Symmetrized Galerkin tensor of Gamma, layout (k, i*nb + j), from the weak form.
Eigen::MatrixXd assemble_gamma_tensor(const SpectralBasis& basis, const QuadratureSpec& quad);

/// Convenience wrapper building a MildStepper (with its own L) for a single step.
DistributionGrid torus_mild_step(const DistributionGrid& h, double dt, const ModelParams& params,
                                 const QuadratureSpec& quad);

} // namespace polykin

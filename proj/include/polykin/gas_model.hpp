#pragma once

#include <Eigen/Core>

#include <functional>
#include <string>

namespace polykin {

/// Model constants of the polyatomic collision model.
struct ModelParams {
    double delta = 2.0;   ///< internal degrees of freedom, >= 2
    double alpha = 1.0;   ///< potential exponent in [0, 2]
    double c_sigma = 1.0; ///< cross-section constant, > 0
    double beta = 6.0;    ///< weight exponent, > 5

    /// Throws ConfigError when a field is outside its validity range.
    void validate() const;

    /// Laguerre parameter delta/2 - 1 of the internal-energy measure.
    double laguerre_a() const { return 0.5 * delta - 1.0; }
    /// Normalization (2 pi)^{3/2} Gamma(delta/2) of the Maxwellian.
    double maxwell_norm() const;
};

/// One kinetic state (v, I).
struct PhasePoint {
    Eigen::Vector3d v = Eigen::Vector3d::Zero();
    double i = 1.0;
};

/// Defect mass, momentum and energy of F - M.
struct DefectMoments {
    double mass = 0.0;
    Eigen::Vector3d momentum = Eigen::Vector3d::Zero();
    double energy = 0.0;
};

/// A function of (v, I) such as a distribution F or a perturbation f.
using PhaseFunction = std::function<double(const Eigen::Vector3d& v, double i)>;

/// Equilibrium M(v, I); throws DomainError for I <= 0.
double maxwellian(const PhasePoint& p, const ModelParams& params);

/**
 * Continuous extension of M to I >= 0 evaluated from raw coordinates.
 * Used at boundary quadrature states where I' = 0 is allowed.
 */
double maxwellian_ext(const Eigen::Vector3d& v, double i, const ModelParams& params);

/// M divided by I^{delta/2-1}: the Gaussian part e^{-|v|^2/2-I} / norm.
double reduced_maxwellian(const Eigen::Vector3d& v, double i, const ModelParams& params);

/// Polynomial weight (1 + |v| + sqrt(I))^beta.
double weight(const PhasePoint& p, const ModelParams& params);
double weight(const Eigen::Vector3d& v, double i, double beta);

/// Gamma function; throws DomainError for s <= 0.
double gamma_fn(double s);

/// Tabulated Gaussian (normalized measure) and Gamma moments.
enum class MomentKind {
    V2,        ///< E[v_i^2]
    V4Axis,    ///< E[v_i^4]
    Speed2,    ///< E[|v|^2]
    Speed4,    ///< E[|v|^4]
    Speed6,    ///< E[|v|^6]
    VIVJ,      ///< E[v_i^2 v_j^2], i != j
    Speed2VJ2, ///< E[|v|^2 v_j^2]
    Speed4VJ2, ///< E[|v|^4 v_j^2]
    I0,        ///< int I^{d/2-1} e^{-I} dI / Gamma(d/2)
    I1,        ///< int I^{d/2} e^{-I} dI / Gamma(d/2)
    I2,        ///< int I^{d/2+1} e^{-I} dI / Gamma(d/2)
};

/// Parse a selector name such as "v2", "speed6", "i1"; throws UsageError if unknown.
MomentKind parse_moment_kind(const std::string& name);

/// Exact value of the selected moment; internal-energy moments use params.delta.
double moment_identity(MomentKind kind, const ModelParams& params = {});

} // namespace polykin

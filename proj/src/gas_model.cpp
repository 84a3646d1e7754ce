#include "polykin/gas_model.hpp"

#include "polykin/errors.hpp"

#include <cmath>
#include <map>

namespace polykin {

void ModelParams::validate() const
{
    if (!(delta >= 2.0) || !std::isfinite(delta))
        throw ConfigError("delta must satisfy delta >= 2");
    if (!(alpha >= 0.0 && alpha <= 2.0))
        throw ConfigError("alpha must lie in [0, 2]");
    if (!(c_sigma > 0.0) || !std::isfinite(c_sigma))
        throw ConfigError("c_sigma must be positive");
    if (!(beta > 5.0) || !std::isfinite(beta))
        throw ConfigError("beta must exceed 5");
}

double ModelParams::maxwell_norm() const
{
    return std::pow(2.0 * M_PI, 1.5) * std::tgamma(0.5 * delta);
}

double reduced_maxwellian(const Eigen::Vector3d& v, double i, const ModelParams& params)
{
    return std::exp(-0.5 * v.squaredNorm() - i) / params.maxwell_norm();
}

double maxwellian_ext(const Eigen::Vector3d& v, double i, const ModelParams& params)
{
    const double a = params.laguerre_a();
    const double pw = (a == 0.0) ? 1.0 : std::pow(std::max(i, 0.0), a);
    return pw * reduced_maxwellian(v, i, params);
}

double maxwellian(const PhasePoint& p, const ModelParams& params)
{
    if (!(p.i > 0.0))
        throw DomainError("maxwellian: internal energy must be positive");
    return maxwellian_ext(p.v, p.i, params);
}

double weight(const Eigen::Vector3d& v, double i, double beta)
{
    return std::pow(1.0 + v.norm() + std::sqrt(std::max(i, 0.0)), beta);
}

double weight(const PhasePoint& p, const ModelParams& params)
{
    return weight(p.v, p.i, params.beta);
}

double gamma_fn(double s)
{
    if (!(s > 0.0))
        throw DomainError("gamma_fn: argument must be positive");
    return std::tgamma(s);
}

MomentKind parse_moment_kind(const std::string& name)
{
    static const std::map<std::string, MomentKind> table = {
        {"v2", MomentKind::V2},           {"v4_axis", MomentKind::V4Axis},
        {"speed2", MomentKind::Speed2},   {"speed4", MomentKind::Speed4},
        {"speed6", MomentKind::Speed6},   {"vivj", MomentKind::VIVJ},
        {"speed2_vj2", MomentKind::Speed2VJ2}, {"speed4_vj2", MomentKind::Speed4VJ2},
        {"i0", MomentKind::I0},           {"i1", MomentKind::I1},
        {"i2", MomentKind::I2},
    };
    const auto it = table.find(name);
    if (it == table.end())
        throw UsageError("unknown moment selector '" + name + "'");
    return it->second;
}

double moment_identity(MomentKind kind, const ModelParams& params)
{
    const double h = 0.5 * params.delta;
    switch (kind) {
    case MomentKind::V2: return 1.0;
    case MomentKind::V4Axis: return 3.0;
    case MomentKind::Speed2: return 3.0;
    case MomentKind::Speed4: return 15.0;
    case MomentKind::Speed6: return 105.0;
    case MomentKind::VIVJ: return 1.0;
    case MomentKind::Speed2VJ2: return 5.0;
    case MomentKind::Speed4VJ2: return 35.0;
    case MomentKind::I0: return 1.0;
    case MomentKind::I1: return h;
    case MomentKind::I2: return h * (h + 1.0);
    }
    throw UsageError("unknown moment selector");
}

} // namespace polykin

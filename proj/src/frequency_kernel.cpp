#include "polykin/frequency_kernel.hpp"

#include "polykin/collision.hpp"
#include "polykin/errors.hpp"
#include "polykin/rng.hpp"

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <cmath>
#include <limits>

namespace polykin {

namespace {

constexpr std::uint64_t kTagKernel = 0x61;

void require_point(const PhasePoint& p, const char* what)
{
    if (!(p.i > 0.0))
        throw DomainError(std::string(what) + ": internal energy must be positive");
}

/// Orthonormal pair spanning the plane perpendicular to the unit vector n.
void perpendicular_frame(const Eigen::Vector3d& n, Eigen::Vector3d& e1, Eigen::Vector3d& e2)
{
    const Eigen::Vector3d trial = std::abs(n(0)) < 0.9 ? Eigen::Vector3d::UnitX() : Eigen::Vector3d::UnitY();
    e1 = (trial - trial.dot(n) * n).normalized();
    e2 = n.cross(e1);
}

/// Shared sampler for the reduced K integrals: proposal proportional to sqrt(M) for (v*, I*).
struct ReducedSampler {
    const ModelParams& params;
    double kappa;
    double a;
    double shape;
    double cq; ///< sqrt(M*) / proposal density

    explicit ReducedSampler(const ModelParams& p)
        : params(p), kappa(collision_kappa(p)), a(p.laguerre_a()), shape(0.25 * p.delta + 0.5)
    {
        cq = std::pow(4.0 * M_PI, 1.5) * std::tgamma(shape) * std::pow(2.0, shape) / std::sqrt(p.maxwell_norm());
    }

    struct Draw {
        Eigen::Vector3d vs, vp;
        double is = 0.0, ip = 0.0;
        double gain = 0.0; ///< multiplies f(v', I') in K2
        double loss = 0.0; ///< multiplies f(v*, I*) in K1
    };

    Draw draw(RandomStream& rng, const PhasePoint& p) const
    {
        Draw d;
        d.vs = std::sqrt(2.0) * rng.normal3();
        d.is = 2.0 * rng.gamma(shape);
        const CollisionParams cp = sample_collision_params(rng, params);
        const CollisionPair pair{p, {d.vs, d.is}};
        const PostCollisionState post = post_collision(pair, cp);
        d.vp = post.p_prime.v;
        d.ip = post.p_prime.i;
        const double rate = kappa * cq * std::pow(total_energy_phi(pair), 1.0 - 0.5 * params.alpha);
        // sqrt(M'*) (I I* / (I' I'*))^{a/2} = (I I* / I')^{a/2} sqrt(reduced M'*)
        if (d.ip > 0.0) {
            const double ratio = a == 0.0 ? 1.0 : std::pow(p.i * d.is / d.ip, 0.5 * a);
            d.gain = 2.0 * rate * ratio *
                     std::sqrt(reduced_maxwellian(post.p_star_prime.v, post.p_star_prime.i, params));
        }
        d.loss = rate * std::sqrt(maxwellian_ext(p.v, p.i, params));
        return d;
    }
};

} // namespace

double nu(const PhasePoint& p, const ModelParams& params, const QuadratureSpec& quad)
{
    require_point(p, "nu");
    const double expo = 1.0 - 0.5 * params.alpha;
    const double kappa = collision_kappa(params);
    if (expo == 0.0)
        return kappa;
    const Rule radial = gauss_laguerre(quad.nu_radial, 0.5);
    const Rule polar = gauss_legendre(quad.nu_polar);
    const Rule internal = gauss_laguerre(quad.nu_internal, params.laguerre_a());
    const double norm_r = std::tgamma(1.5);
    const double norm_i = std::tgamma(0.5 * params.delta);
    const double speed = p.v.norm();
    double total = 0.0;
    for (std::size_t kr = 0; kr < radial.size(); ++kr) {
        const double s = std::sqrt(2.0 * radial.nodes[kr]);
        for (std::size_t kp = 0; kp < polar.size(); ++kp) {
            const double rel2 = std::max(0.0, speed * speed + s * s - 2.0 * speed * s * polar.nodes[kp]);
            const double wrp = radial.weights[kr] * 0.5 * polar.weights[kp];
            double inner = 0.0;
            for (std::size_t ki = 0; ki < internal.size(); ++ki)
                inner += internal.weights[ki] * std::pow(0.25 * rel2 + p.i + internal.nodes[ki], expo);
            total += wrp * inner;
        }
    }
    return kappa * total / (norm_r * norm_i);
}

double k1(const KernelPoint& kp, const ModelParams& params, const QuadratureSpec&)
{
    require_point(kp.p, "k1");
    require_point(kp.p_star, "k1");
    const CollisionPair pair{kp.p, kp.p_star};
    const double m = maxwellian(kp.p, params) * maxwellian(kp.p_star, params);
    return collision_kappa(params) * std::pow(total_energy_phi(pair), 1.0 - 0.5 * params.alpha) * std::sqrt(m);
}

double k1_bound_shape(const KernelPoint& kp, const ModelParams& params)
{
    return std::pow(kp.p_star.i, 0.25 * params.delta - 1.0) *
           std::exp(-kp.p.v.squaredNorm() / 16.0 - kp.p_star.v.squaredNorm() / 16.0 - kp.p.i / 8.0 -
                    kp.p_star.i / 8.0);
}

KernelEstimate k2(const KernelPoint& kp, const ModelParams& params, const QuadratureSpec& quad)
{
    require_point(kp.p, "k2");
    require_point(kp.p_star, "k2");
    const Eigen::Vector3d& v = kp.p.v;
    const Eigen::Vector3d& y = kp.p_star.v;
    const double I = kp.p.i;
    const double J = kp.p_star.i;
    const Eigen::Vector3d u = v - y;
    const double un = u.norm();
    if (!(un > 1e-12 * (1.0 + v.norm())))
        throw DomainError("k2: the representation is singular at v == v*");

    const double a = params.laguerre_a();
    const double s = params.delta + 0.5 * (params.alpha - 1.0);
    const Eigen::Vector3d n = u / un;
    Eigen::Vector3d e1, e2;
    perpendicular_frame(n, e1, e2);
    const Eigen::Vector3d W = 0.5 * (v + y);
    const double uW = u.dot(W);

    const Rule trans = gauss_hermite(quad.k2_transverse);
    const Rule par_smooth = gauss_legendre(quad.k2_parallel);
    const Rule par_edge = gauss_jacobi(quad.k2_parallel, a, 0.0);
    // the parallel Gaussian combined with e^{-I'*/2} is centred at |u|/2
    const double centre = 0.5 * un;
    const double half = 10.0;

    // integral over z (partner velocity shifted by u/2) for a fixed partner energy I*
    auto z_integral = [&](double is) {
        const double c = (I + is - J + uW) / un; // feasibility limit for the parallel component
        const double lo = centre - half;
        if (c <= lo)
            return 0.0;
        const bool edge = c < centre + half;
        const double hi = edge ? c : centre + half;
        const Rule& rule = edge ? par_edge : par_smooth;
        const double scale = 0.5 * (hi - lo);
        const double jac = edge ? std::pow(scale, a + 1.0) : scale;
        double total = 0.0;
        for (std::size_t kz = 0; kz < rule.size(); ++kz) {
            const double t = rule.nodes[kz];
            const double zp = lo + scale * (1.0 + t);
            const double isp = un * (c - zp);
            // edge rule carries (c - z)^a in its weight; otherwise evaluate the power directly
            const double pw = edge ? std::pow(un, a) : std::pow(isp, a);
            const double base = rule.weights[kz] * jac * pw * std::exp(-0.5 * zp * zp - 0.5 * isp);
            double tsum = 0.0;
            for (std::size_t k1i = 0; k1i < trans.size(); ++k1i)
                for (std::size_t k2i = 0; k2i < trans.size(); ++k2i) {
                    const Eigen::Vector3d z = zp * n + trans.nodes[k1i] * e1 + trans.nodes[k2i] * e2;
                    const Eigen::Vector3d vs = z - 0.5 * u;
                    const double phi = 0.25 * (v - vs).squaredNorm() + I + is;
                    tsum += trans.weights[k1i] * trans.weights[k2i] * std::pow(phi, -s);
                }
            total += base * tsum;
        }
        return total;
    };
    auto integrand = [&](double is) {
        const double pw = a == 0.0 ? 1.0 : std::pow(is, a);
        return pw * std::exp(-0.5 * is) * z_integral(is);
    };

    using boost::math::quadrature::gauss_kronrod;
    double err_a = 0.0, err_b = 0.0, part_a = 0.0;
    // I* at which the feasibility limit crosses the Gaussian centre
    const double split = J - I - uW + un * centre;
    double part_b;
    if (split > 0.0) {
        part_a = gauss_kronrod<double, 15>::integrate(integrand, 0.0, split, 12, quad.k2_tol, &err_a);
        part_b = gauss_kronrod<double, 15>::integrate(integrand, split, std::numeric_limits<double>::infinity(), 12,
                                                      quad.k2_tol, &err_b);
    } else {
        part_b = gauss_kronrod<double, 15>::integrate(integrand, 0.0, std::numeric_limits<double>::infinity(), 12,
                                                      quad.k2_tol, &err_b);
    }
    const double pre = 4.0 * params.c_sigma / params.maxwell_norm() * std::pow(I * J, 0.5 * a) *
                       std::exp(-un * un / 8.0);
    KernelEstimate out;
    out.value = pre * (part_a + part_b);
    out.error = pre * (std::abs(err_a) + std::abs(err_b));
    return out;
}

KernelEstimate kw_weighted_integral(const PhasePoint& p, double eps, double m, const ModelParams& params,
                                    const QuadratureSpec& quad)
{
    require_point(p, "kw_weighted_integral");
    if (!(eps >= 0.0 && eps <= 1.0 / 64.0))
        throw UsageError("kw_weighted_integral: eps must lie in [0, 1/64]");
    if (!(m >= 0.0 && m <= 1.0 / 8.0))
        throw UsageError("kw_weighted_integral: m must lie in [0, 1/8]");
    const ReducedSampler sampler(params);
    const double wv = weight(p, params);
    auto G = [&](const Eigen::Vector3d& y, double j) {
        return wv / weight(y, j, params.beta) * std::exp(eps * (p.v - y).squaredNorm()) * std::pow(1.0 + j, m);
    };
    MeanAccumulator acc;
    for_each_block(quad.kernel_samples, quad.seed, kTagKernel, [&](RandomStream& rng, std::int64_t b, std::int64_t e) {
        for (std::int64_t k = b; k < e; ++k) {
            const ReducedSampler::Draw d = sampler.draw(rng, p);
            double x = d.loss * G(d.vs, d.is);
            if (d.gain > 0.0)
                x += d.gain * G(d.vp, d.ip);
            acc.add(x);
        }
    });
    return {acc.mean, acc.std_error()};
}

KernelEstimate K_apply(const PhaseFunction& f, const PhasePoint& p, bool weighted, const ModelParams& params,
                       const QuadratureSpec& quad)
{
    if (!f)
        throw UsageError("K_apply: function is not evaluable");
    require_point(p, "K_apply");
    const ReducedSampler sampler(params);
    const double wv = weighted ? weight(p, params) : 1.0;
    auto g = [&](const Eigen::Vector3d& y, double j) {
        return weighted ? f(y, j) / weight(y, j, params.beta) : f(y, j);
    };
    MeanAccumulator acc;
    for_each_block(quad.kernel_samples, quad.seed, kTagKernel, [&](RandomStream& rng, std::int64_t b, std::int64_t e) {
        for (std::int64_t k = b; k < e; ++k) {
            const ReducedSampler::Draw d = sampler.draw(rng, p);
            double x = -d.loss * g(d.vs, d.is);
            if (d.gain > 0.0)
                x += d.gain * g(d.vp, d.ip);
            acc.add(wv * x);
        }
    });
    return {acc.mean, acc.std_error()};
}

} // namespace polykin

#include "polykin/collision.hpp"

#include "polykin/errors.hpp"

#include <boost/math/special_functions/beta.hpp>

#include <cmath>
#include <limits>

namespace polykin {

namespace {

constexpr std::uint64_t kTagQ = 0x51;
constexpr std::uint64_t kTagGamma = 0x52;

void require_callable(const PhaseFunction& f, const char* what)
{
    if (!f)
        throw UsageError(std::string(what) + ": distribution is not evaluable");
}

void require_point(const PhasePoint& p, const char* what)
{
    if (!(p.i > 0.0))
        throw DomainError(std::string(what) + ": internal energy must be positive");
}

/// (x / y)^a with the convention that a == 0 gives 1.
double power_ratio(double x, double y, double a)
{
    if (a == 0.0)
        return 1.0;
    return std::pow(x / y, a);
}

/// Difference estimator with a rounding floor, so that exact cancellation is not overstated.
CollisionEstimate finish(const MeanAccumulator& gain, const MeanAccumulator& loss,
                         const MeanAccumulator& diff, double abs_sum)
{
    CollisionEstimate e;
    e.samples = diff.n;
    e.gain = gain.mean;
    e.loss = loss.mean;
    e.value = diff.mean;
    e.gain_error = gain.std_error();
    e.loss_error = loss.std_error();
    const double floor = 4.0 * std::numeric_limits<double>::epsilon() * abs_sum / double(std::max<std::int64_t>(diff.n, 1));
    e.std_error = std::max(diff.std_error(), floor);
    return e;
}

} // namespace

double total_energy_phi(const CollisionPair& pair)
{
    return 0.25 * (pair.p.v - pair.p_star.v).squaredNorm() + pair.p.i + pair.p_star.i;
}

double cross_section_b(const CollisionPair& pair, const ModelParams& params)
{
    return params.c_sigma * std::pow(total_energy_phi(pair), 1.0 - 0.5 * params.alpha);
}

PostCollisionState post_collision(const CollisionPair& pair, const CollisionParams& cp)
{
    const double phi = total_energy_phi(pair);
    const Eigen::Vector3d V = 0.5 * (pair.p.v + pair.p_star.v);
    const double s = std::sqrt(cp.r_frac * phi);
    PostCollisionState out;
    out.p_prime.v = V + s * cp.omega;
    out.p_star_prime.v = V - s * cp.omega;
    const double internal = (1.0 - cp.r_frac) * phi;
    out.p_prime.i = cp.r_split * internal;
    out.p_star_prime.i = internal - out.p_prime.i;
    return out;
}

double collision_kappa(const ModelParams& params)
{
    const double h = 0.5 * params.delta;
    return params.c_sigma * 4.0 * M_PI * boost::math::beta(1.5, params.delta) * boost::math::beta(h, h);
}

CollisionParams sample_collision_params(RandomStream& rng, const ModelParams& params)
{
    CollisionParams cp;
    cp.omega = rng.unit_vector();
    cp.r_frac = rng.beta(1.5, params.delta);
    cp.r_split = rng.beta(0.5 * params.delta, 0.5 * params.delta);
    return cp;
}

MeasureSample sample_collision_measure(RandomStream& rng, const ModelParams& params, double kappa)
{
    MeasureSample s;
    const double h = 0.5 * params.delta;
    s.v = rng.normal3();
    s.vs = rng.normal3();
    s.i = rng.gamma(h);
    s.is = rng.gamma(h);
    const CollisionParams cp = sample_collision_params(rng, params);
    const CollisionPair pair{{s.v, s.i}, {s.vs, s.is}};
    const PostCollisionState post = post_collision(pair, cp);
    s.vp = post.p_prime.v;
    s.vsp = post.p_star_prime.v;
    s.ip = post.p_prime.i;
    s.isp = post.p_star_prime.i;
    s.rate = kappa * std::pow(total_energy_phi(pair), 1.0 - 0.5 * params.alpha);
    return s;
}

std::vector<WeightedMeasureSample> stratified_collision_rule(const ModelParams& params, int n_hermite, int n_phi,
                                                             std::int64_t per_node, std::uint64_t seed,
                                                             std::uint64_t tag, int replica, int replicas)
{
    if (n_hermite < 1 || n_phi < 1 || per_node < 1 || replicas < 1 || replica < 0 || replica >= replicas)
        throw UsageError("stratified_collision_rule: invalid rule size");
    const double delta = params.delta;
    const double h = 0.5 * delta;
    const double kappa = collision_kappa(params);
    const double rate_power = 1.0 - 0.5 * params.alpha;
    const Rule vr = gauss_hermite(n_hermite);
    const Rule pr = gauss_laguerre(n_phi, 0.5 + delta + rate_power);
    double mass_v = 0.0;
    for (double x : vr.weights)
        mass_v += x;
    const double mass_phi = std::tgamma(1.5 + delta);

    std::vector<WeightedMeasureSample> out;
    out.reserve(stratified_node_count(n_hermite, n_phi) * std::size_t(per_node));
    std::uint64_t n = 0;
    for (int a = 0; a < n_hermite; ++a)
        for (int b = 0; b < n_hermite; ++b)
            for (int c = 0; c < n_hermite; ++c)
                for (std::size_t q = 0; q < pr.size(); ++q, ++n) {
                    const double wv = vr.weights[a] * vr.weights[b] * vr.weights[c] / (mass_v * mass_v * mass_v);
                    const Eigen::Vector3d V = Eigen::Vector3d(vr.nodes[a], vr.nodes[b], vr.nodes[c]) / std::sqrt(2.0);
                    const double phi = pr.nodes[q];
                    const double w = wv * kappa * pr.weights[q] / mass_phi / double(per_node);
                    RandomStream rng(block_seed(seed, tag, n * std::uint64_t(replicas) + std::uint64_t(replica)));
                    for (std::int64_t s = 0; s < per_node; ++s) {
                        const double t_u = rng.beta(1.5, delta);
                        const double split = rng.beta(h, h);
                        const Eigen::Vector3d u = 2.0 * std::sqrt(phi * t_u) * rng.unit_vector();
                        const double internal = phi * (1.0 - t_u);
                        const CollisionParams cp = sample_collision_params(rng, params);
                        const CollisionPair pair{{V + 0.5 * u, internal * split}, {V - 0.5 * u, internal * (1.0 - split)}};
                        const PostCollisionState post = post_collision(pair, cp);
                        WeightedMeasureSample ws;
                        ws.s.v = pair.p.v;
                        ws.s.vs = pair.p_star.v;
                        ws.s.i = pair.p.i;
                        ws.s.is = pair.p_star.i;
                        ws.s.vp = post.p_prime.v;
                        ws.s.vsp = post.p_star_prime.v;
                        ws.s.ip = post.p_prime.i;
                        ws.s.isp = post.p_star_prime.i;
                        ws.s.rate = kappa * std::pow(phi, rate_power);
                        ws.weight = w;
                        out.push_back(ws);
                    }
                }
    return out;
}

CollisionEstimate q_apply(const PhaseFunction& F, const PhaseFunction& G, const PhasePoint& p,
                          const ModelParams& params, const QuadratureSpec& quad)
{
    require_callable(F, "q_apply");
    require_callable(G, "q_apply");
    require_point(p, "q_apply");
    const double kappa = collision_kappa(params);
    const double a = params.laguerre_a();
    const double h = 0.5 * params.delta;
    const double Fp = F(p.v, p.i);
    MeanAccumulator gain, loss, diff;
    double abs_sum = 0.0;
    for_each_block(quad.mc_samples, quad.seed, kTagQ, [&](RandomStream& rng, std::int64_t b, std::int64_t e) {
        for (std::int64_t k = b; k < e; ++k) {
            const Eigen::Vector3d vs = rng.normal3();
            const double is = rng.gamma(h);
            const CollisionParams cp = sample_collision_params(rng, params);
            const CollisionPair pair{p, {vs, is}};
            const PostCollisionState post = post_collision(pair, cp);
            const double rate = kappa * std::pow(total_energy_phi(pair), 1.0 - 0.5 * params.alpha);
            const double m_star = maxwellian_ext(vs, is, params);
            double g = 0.0;
            const double ip = post.p_prime.i, isp = post.p_star_prime.i;
            if (ip > 0.0 && isp > 0.0) {
                g = rate * power_ratio(p.i * is, ip * isp, a) * F(post.p_prime.v, ip) *
                    G(post.p_star_prime.v, isp) / m_star;
            }
            const double l = rate * Fp * G(vs, is) / m_star;
            gain.add(g);
            loss.add(l);
            diff.add(g - l);
            abs_sum += std::abs(g) + std::abs(l);
        }
    });
    return finish(gain, loss, diff, abs_sum);
}

CollisionEstimate gamma_apply(const PhaseFunction& f, const PhaseFunction& g, const PhasePoint& p,
                              const ModelParams& params, const QuadratureSpec& quad)
{
    require_callable(f, "gamma_apply");
    require_callable(g, "gamma_apply");
    require_point(p, "gamma_apply");
    const double kappa = collision_kappa(params);
    const double a = params.laguerre_a();
    // proposal for (v*, I*) proportional to sqrt(M): N(0, 2) per axis and Gamma(delta/4 + 1/2, 2)
    const double shape = 0.25 * params.delta + 0.5;
    const double cq = std::pow(4.0 * M_PI, 1.5) * std::tgamma(shape) * std::pow(2.0, shape) /
                      std::sqrt(params.maxwell_norm());
    const double fp = f(p.v, p.i);
    MeanAccumulator gain, loss, diff;
    double abs_sum = 0.0;
    for_each_block(quad.mc_samples, quad.seed, kTagGamma, [&](RandomStream& rng, std::int64_t b, std::int64_t e) {
        for (std::int64_t k = b; k < e; ++k) {
            const Eigen::Vector3d vs = std::sqrt(2.0) * rng.normal3();
            const double is = 2.0 * rng.gamma(shape);
            const CollisionParams cp = sample_collision_params(rng, params);
            const CollisionPair pair{p, {vs, is}};
            const PostCollisionState post = post_collision(pair, cp);
            const double rate = kappa * cq * std::pow(total_energy_phi(pair), 1.0 - 0.5 * params.alpha);
            double gp = 0.0;
            const double ip = post.p_prime.i, isp = post.p_star_prime.i;
            if (ip > 0.0 && isp > 0.0) {
                gp = rate * power_ratio(p.i * is, ip * isp, 0.5 * a) * f(post.p_prime.v, ip) *
                     g(post.p_star_prime.v, isp);
            }
            const double l = rate * fp * g(vs, is);
            gain.add(gp);
            loss.add(l);
            diff.add(gp - l);
            abs_sum += std::abs(gp) + std::abs(l);
        }
    });
    return finish(gain, loss, diff, abs_sum);
}

double entropy_h(const DistributionGrid& F, const ModelParams& params)
{
    const PhaseGrid& ph = F.phase;
    if (F.values.size() != F.cells() * ph.size())
        throw UsageError("entropy_h: value array does not match the grid");
    const double a = params.laguerre_a();
    const double vol = F.cell_volume();
    double h = 0.0;
    for (std::size_t c = 0; c < F.cells(); ++c) {
        const double* vals = F.cell(c);
        for (std::size_t n = 0; n < ph.size(); ++n) {
            const double f = vals[n];
            if (!(f > 0.0))
                throw DomainError("entropy_h: distribution must be positive at every node");
            const double i = ph.energy(n);
            h += vol * ph.quad_weight(n) * f * (std::log(f) - a * std::log(i));
        }
    }
    return h;
}

double entropy_maxwellian(const ModelParams& params)
{
    return -std::log(params.maxwell_norm()) - 1.5 - 0.5 * params.delta;
}

} // namespace polykin

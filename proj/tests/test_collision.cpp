#include <doctest.h>

#include "polykin/collision.hpp"
#include "polykin/errors.hpp"

#include <cmath>

using namespace polykin;

namespace {

PhaseFunction maxwell_fn(const ModelParams& p)
{
    return [p](const Eigen::Vector3d& v, double i) { return maxwellian_ext(v, i, p); };
}

} // namespace

TEST_CASE("total energy and cross section")
{
    CHECK(total_energy_phi({{Eigen::Vector3d(1, 2, 3), 1.0}, {Eigen::Vector3d(1, 2, 3), 1.0}}) == doctest::Approx(2.0));
    const CollisionPair pair{{Eigen::Vector3d(1, 0, 0), 0.5}, {Eigen::Vector3d(-1, 0, 0), 0.5}};
    CHECK(total_energy_phi(pair) == doctest::Approx(2.0));
    ModelParams p;
    p.alpha = 2.0;
    p.c_sigma = 1.7;
    CHECK(cross_section_b(pair, p) == doctest::Approx(1.7));
    p.alpha = 0.0;
    p.c_sigma = 1.0;
    const CollisionPair four{{Eigen::Vector3d(0, 0, 0), 1.0}, {Eigen::Vector3d(0, 0, 0), 3.0}};
    CHECK(cross_section_b(four, p) == doctest::Approx(4.0));
    p.alpha = 1.0;
    const CollisionPair nine{{Eigen::Vector3d(0, 0, 0), 4.0}, {Eigen::Vector3d(0, 0, 0), 5.0}};
    CHECK(cross_section_b(nine, p) == doctest::Approx(3.0));
}

TEST_CASE("post-collision map examples")
{
    const CollisionPair pair{{Eigen::Vector3d(1, 0, 0), 0.0}, {Eigen::Vector3d(-1, 0, 0), 0.0}};
    const PostCollisionState a = post_collision(pair, {Eigen::Vector3d(0, 1, 0), 1.0, 0.5});
    CHECK((a.p_prime.v - Eigen::Vector3d(0, 1, 0)).norm() < 1e-15);
    CHECK((a.p_star_prime.v - Eigen::Vector3d(0, -1, 0)).norm() < 1e-15);
    CHECK(a.p_prime.i == 0.0);
    CHECK(a.p_star_prime.i == 0.0);
    const PostCollisionState b = post_collision(pair, {Eigen::Vector3d(0, 1, 0), 0.0, 0.5});
    CHECK(b.p_prime.v.norm() < 1e-15);
    CHECK(b.p_star_prime.v.norm() < 1e-15);
    CHECK(b.p_prime.i == doctest::Approx(0.5));
    CHECK(b.p_star_prime.i == doctest::Approx(0.5));
}

TEST_CASE("post-collision map conserves momentum and energy")
{
    ModelParams p;
    p.delta = 3.0;
    RandomStream rng(11);
    double worst_e = 0.0, worst_m = 0.0;
    for (int k = 0; k < 100000; ++k) {
        const CollisionPair pair{{3.0 * rng.normal3(), 5.0 * rng.uniform() + 1e-9},
                                 {3.0 * rng.normal3(), 5.0 * rng.uniform() + 1e-9}};
        const CollisionParams cp = sample_collision_params(rng, p);
        const PostCollisionState s = post_collision(pair, cp);
        const Eigen::Vector3d mom = pair.p.v + pair.p_star.v;
        const double e0 = 0.5 * pair.p.v.squaredNorm() + 0.5 * pair.p_star.v.squaredNorm() + pair.p.i + pair.p_star.i;
        const double e1 = 0.5 * s.p_prime.v.squaredNorm() + 0.5 * s.p_star_prime.v.squaredNorm() +
                          s.p_prime.i + s.p_star_prime.i;
        worst_m = std::max(worst_m, (s.p_prime.v + s.p_star_prime.v - mom).norm() / (1.0 + mom.norm()));
        worst_e = std::max(worst_e, std::abs(e1 - e0) / e0);
    }
    CHECK(worst_m < 1e-14);
    CHECK(worst_e < 1e-12);
}

TEST_CASE("collision measure mass")
{
    // independent evaluation of 4 pi * int R^{1/2}(1-R)^{delta-1} dR * int (r(1-r))^{delta/2-1} dr
    for (double delta : {2.0, 3.0, 5.0}) {
        ModelParams p;
        p.delta = delta;
        const Rule g = gauss_legendre(200, 0.0, 1.0);
        double a = 0.0, b = 0.0;
        for (std::size_t k = 0; k < g.size(); ++k) {
            const double x = g.nodes[k];
            a += g.weights[k] * std::sqrt(x) * std::pow(1 - x, delta - 1);
            b += g.weights[k] * std::pow(x * (1 - x), 0.5 * delta - 1);
        }
        CHECK(collision_kappa(p) == doctest::Approx(4 * M_PI * a * b).epsilon(1e-5));
    }
}

TEST_CASE("Q(M, M) vanishes within the reported error")
{
    QuadratureSpec quad;
    quad.mc_samples = 20000;
    for (double delta : {2.0, 3.0, 5.0})
        for (double alpha : {0.0, 1.0, 2.0}) {
            ModelParams p;
            p.delta = delta;
            p.alpha = alpha;
            const PhaseFunction M = maxwell_fn(p);
            for (const PhasePoint& x : {PhasePoint{Eigen::Vector3d(0, 0, 0), 0.1}, PhasePoint{Eigen::Vector3d(2, -1, 3), 4.0},
                                        PhasePoint{Eigen::Vector3d(5, 1, 0), 9.0}}) {
                const CollisionEstimate q = q_apply(M, M, x, p, quad);
                CHECK(std::abs(q.value) <= 3.0 * q.std_error);
                CHECK(q.gain > 0.0);
            }
        }
}

TEST_CASE("q_apply is reproducible and validates input")
{
    ModelParams p;
    QuadratureSpec quad;
    quad.mc_samples = 5000;
    const PhaseFunction F = [&](const Eigen::Vector3d& v, double i) {
        return maxwellian_ext(v, i, p) * (1.0 + 0.3 * std::tanh(v(0)));
    };
    const PhasePoint x{Eigen::Vector3d(0.5, 0, 0), 1.0};
    const CollisionEstimate a = q_apply(F, F, x, p, quad);
    const CollisionEstimate b = q_apply(F, F, x, p, quad);
    CHECK(a.value == b.value);
    CHECK(a.std_error == b.std_error);
    CHECK_THROWS_AS(q_apply(PhaseFunction{}, F, x, p, quad), UsageError);
    CHECK_THROWS_AS(q_apply(F, F, PhasePoint{Eigen::Vector3d::Zero(), 0.0}, p, quad), DomainError);
}

TEST_CASE("gamma_apply special cases")
{
    ModelParams p;
    p.delta = 3.0;
    QuadratureSpec quad;
    quad.mc_samples = 20000;
    const PhaseFunction zero = [](const Eigen::Vector3d&, double) { return 0.0; };
    const PhaseFunction sqm = [&](const Eigen::Vector3d& v, double i) { return std::sqrt(maxwellian_ext(v, i, p)); };
    const PhasePoint x{Eigen::Vector3d(1, 0.5, 0), 2.0};
    CHECK(gamma_apply(zero, zero, x, p, quad).value == 0.0);
    const CollisionEstimate e = gamma_apply(sqm, sqm, x, p, quad);
    CHECK(std::abs(e.value) <= 3.0 * e.std_error);
    CHECK(std::abs(e.value) < 1e-10 * e.gain);
}

TEST_CASE("weak form of Q conserves the collision invariants")
{
    // Integrate q_apply against psi on a tensor grid for a two-temperature mixture.
    ModelParams p;
    p.delta = 3.0;
    QuadratureSpec quad;
    quad.mc_samples = 4000;
    const PhaseFunction F = [&](const Eigen::Vector3d& v, double i) {
        ModelParams q = p;
        const double hot = std::pow(1.3, -1.5 - 0.5 * p.delta) * maxwellian_ext(v / std::sqrt(1.3), i / 1.3, q);
        return 0.5 * maxwellian_ext(v - Eigen::Vector3d(0.4, 0, 0), i, q) + 0.5 * hot;
    };
    const PhaseGrid g = make_phase_grid(p, 6, 4);
    double moments[5] = {0, 0, 0, 0, 0}, var[5] = {0, 0, 0, 0, 0}, scale = 0.0;
    for (std::size_t n = 0; n < g.size(); ++n) {
        const PhasePoint x = g.point(n);
        QuadratureSpec node_quad = quad;
        node_quad.seed = quad.seed + n; // independent streams so that node errors add in quadrature
        const CollisionEstimate q = q_apply(F, F, x, p, node_quad);
        const double w = g.quad_weight(n);
        const double psi[5] = {1.0, x.v(0), x.v(1), x.v(2), 0.5 * x.v.squaredNorm() + x.i};
        for (int k = 0; k < 5; ++k) {
            moments[k] += w * psi[k] * q.value;
            var[k] += std::pow(w * psi[k] * q.std_error, 2);
        }
        scale += w * (0.5 * x.v.squaredNorm() + x.i) * std::abs(q.value);
    }
    for (int k = 0; k < 5; ++k)
        CHECK(std::abs(moments[k]) <= 4.0 * std::sqrt(var[k]) + 0.005 * scale);
}

TEST_CASE("entropy functional")
{
    for (double delta : {2.0, 3.0}) {
        ModelParams p;
        p.delta = delta;
        const PhaseGrid g = make_phase_grid(p, 12, 10);
        const auto M = [&](const PhasePoint& x) { return maxwellian(x, p); };
        // closed form: -log((2pi)^{3/2} Gamma(delta/2)) - 3/2 - delta/2
        const double hm = -std::log(std::pow(2 * M_PI, 1.5) * std::tgamma(0.5 * delta)) - 1.5 - 0.5 * delta;
        CHECK(entropy_h(make_homogeneous(g, M), p) == doctest::Approx(hm).epsilon(1e-10));
        CHECK(entropy_maxwellian(p) == doctest::Approx(hm).epsilon(1e-14));
        CHECK(entropy_h(make_homogeneous(g, [&](const PhasePoint& x) { return 2 * M(x); }), p) ==
              doctest::Approx(2 * hm + 2 * std::log(2.0)).epsilon(1e-10));
        // same mass, momentum and energy but not Maxwellian
        const auto G = [&](const PhasePoint& x) {
            const double a = 0.6, s2 = 1.0 - a * a / 3.0;
            double gv = 0.0;
            for (double sgn : {-1.0, 1.0}) {
                Eigen::Vector3d d = x.v;
                d(0) -= sgn * a;
                gv += 0.5 * std::exp(-0.5 * d.squaredNorm() / s2) / std::pow(2 * M_PI * s2, 1.5);
            }
            return gv * std::pow(x.i, 0.5 * delta - 1) * std::exp(-x.i) / std::tgamma(0.5 * delta);
        };
        const DistributionGrid fg = make_homogeneous(g, G);
        const DefectMoments d = defect_moments(fg, p);
        CHECK(std::abs(d.mass) < 1e-9);
        CHECK(std::abs(d.energy) < 1e-8);
        CHECK(entropy_h(fg, p) > hm);
    }
    ModelParams p;
    const PhaseGrid g = make_phase_grid(p, 4, 2);
    CHECK_THROWS_AS(entropy_h(make_homogeneous(g, [](const PhasePoint&) { return 0.0; }), p), DomainError);
}

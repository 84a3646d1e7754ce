#include <doctest.h>

#include "polykin/errors.hpp"
#include "polykin/gas_model.hpp"
#include "polykin/grid.hpp"

#include <cmath>

using namespace polykin;

TEST_CASE("maxwellian closed form at delta = 2")
{
    ModelParams p;
    p.delta = 2.0;
    const long double expected = std::exp(-1.0L) / std::pow(2.0L * 3.14159265358979323846264338L, 1.5L);
    CHECK(maxwellian({Eigen::Vector3d::Zero(), 1.0}, p) == doctest::Approx(double(expected)).epsilon(1e-14));
    CHECK_THROWS_AS(maxwellian({Eigen::Vector3d::Zero(), 0.0}, p), DomainError);
    CHECK(maxwellian({Eigen::Vector3d(3, -2, 1), 7.0}, p) > 0.0);
}

TEST_CASE("maxwellian normalizes for several delta")
{
    for (double delta : {2.0, 2.5, 3.0, 5.0}) {
        ModelParams p;
        p.delta = delta;
        const PhaseGrid g = make_phase_grid(p, 10, 8);
        double mass = 0.0;
        for (std::size_t n = 0; n < g.size(); ++n)
            mass += g.quad_weight(n) * maxwellian(g.point(n), p);
        CHECK(mass == doctest::Approx(1.0).epsilon(1e-12));
    }
}

TEST_CASE("weight values and monotonicity")
{
    ModelParams p;
    CHECK(weight(Eigen::Vector3d::Zero(), 0.0, 3.3) == 1.0);
    CHECK(weight({Eigen::Vector3d(1, 0, 0), 4.0}, p) == doctest::Approx(4096.0));
    CHECK(weight(Eigen::Vector3d(3, 4, 0), 0.0, 5.5) == doctest::Approx(std::pow(6.0, 5.5)));
    double last = 0.0;
    for (double s = 0.0; s < 10.0; s += 0.5) {
        const double w = weight(Eigen::Vector3d(s, 0, 0), 1.0, 6.0);
        CHECK(w >= last);
        last = w;
    }
    last = 0.0;
    for (double i = 0.0; i < 10.0; i += 0.5) {
        const double w = weight(Eigen::Vector3d(1, 0, 0), i, 6.0);
        CHECK(w >= last);
        last = w;
    }
}

TEST_CASE("gamma function values")
{
    CHECK(gamma_fn(1.0) == doctest::Approx(1.0));
    CHECK(gamma_fn(0.5) == doctest::Approx(std::sqrt(M_PI)));
    CHECK(gamma_fn(2.5) == doctest::Approx(0.75 * std::sqrt(M_PI)));
    CHECK_THROWS_AS(gamma_fn(0.0), DomainError);
    CHECK_THROWS_AS(gamma_fn(-1.5), DomainError);
}

TEST_CASE("moment identities agree with direct Gauss quadrature")
{
    const Rule h = gauss_hermite(16);
    auto gauss3 = [&](auto g) {
        double s = 0.0;
        for (std::size_t a = 0; a < h.size(); ++a)
            for (std::size_t b = 0; b < h.size(); ++b)
                for (std::size_t c = 0; c < h.size(); ++c)
                    s += h.weights[a] * h.weights[b] * h.weights[c] *
                         g(h.nodes[a], h.nodes[b], h.nodes[c]);
        return s / std::pow(2.0 * M_PI, 1.5);
    };
    const double tol = 1e-10;
    CHECK(gauss3([](double x, double, double) { return x * x; }) ==
          doctest::Approx(moment_identity(MomentKind::V2)).epsilon(tol));
    CHECK(gauss3([](double x, double, double) { return std::pow(x, 4); }) ==
          doctest::Approx(moment_identity(MomentKind::V4Axis)).epsilon(tol));
    CHECK(gauss3([](double x, double y, double z) { return x * x + y * y + z * z; }) ==
          doctest::Approx(moment_identity(MomentKind::Speed2)).epsilon(tol));
    CHECK(gauss3([](double x, double y, double z) { return std::pow(x * x + y * y + z * z, 2); }) ==
          doctest::Approx(moment_identity(MomentKind::Speed4)).epsilon(tol));
    CHECK(gauss3([](double x, double y, double z) { return std::pow(x * x + y * y + z * z, 3); }) ==
          doctest::Approx(moment_identity(MomentKind::Speed6)).epsilon(tol));
    CHECK(gauss3([](double x, double y, double) { return x * x * y * y; }) ==
          doctest::Approx(moment_identity(MomentKind::VIVJ)).epsilon(tol));
    CHECK(gauss3([](double x, double y, double z) { return (x * x + y * y + z * z) * y * y; }) ==
          doctest::Approx(moment_identity(MomentKind::Speed2VJ2)).epsilon(tol));
    CHECK(gauss3([](double x, double y, double z) { return std::pow(x * x + y * y + z * z, 2) * z * z; }) ==
          doctest::Approx(moment_identity(MomentKind::Speed4VJ2)).epsilon(tol));

    for (double delta : {2.0, 3.0, 5.0}) {
        ModelParams p;
        p.delta = delta;
        const Rule l = gauss_laguerre(12, p.laguerre_a());
        double m[3] = {0, 0, 0};
        for (std::size_t k = 0; k < l.size(); ++k)
            for (int j = 0; j < 3; ++j)
                m[j] += l.weights[k] * std::pow(l.nodes[k], j) / std::tgamma(0.5 * delta);
        CHECK(m[0] == doctest::Approx(moment_identity(MomentKind::I0, p)).epsilon(tol));
        CHECK(m[1] == doctest::Approx(moment_identity(MomentKind::I1, p)).epsilon(tol));
        CHECK(m[2] == doctest::Approx(moment_identity(MomentKind::I2, p)).epsilon(tol));
    }
    CHECK(parse_moment_kind("speed6") == MomentKind::Speed6);
    CHECK_THROWS_AS(parse_moment_kind("speed8"), UsageError);
}

TEST_CASE("defect moments of simple distributions")
{
    for (double delta : {2.0, 3.0}) {
        ModelParams p;
        p.delta = delta;
        const PhaseGrid g = make_phase_grid(p, 6, 4);
        const auto M = [&](const PhasePoint& x) { return maxwellian(x, p); };
        const DefectMoments zero = defect_moments(make_homogeneous(g, M), p);
        CHECK(std::abs(zero.mass) < 1e-14);
        CHECK(zero.momentum.norm() < 1e-14);
        CHECK(std::abs(zero.energy) < 1e-13);

        const DefectMoments two = defect_moments(make_homogeneous(g, [&](const PhasePoint& x) { return 2 * M(x); }), p);
        CHECK(two.mass == doctest::Approx(1.0).epsilon(1e-12));
        CHECK(two.momentum.norm() < 1e-13);
        // E[|v|^2] + 2 E[I] from the moment table
        const double e = moment_identity(MomentKind::Speed2) + 2.0 * moment_identity(MomentKind::I1, p);
        CHECK(two.energy == doctest::Approx(e).epsilon(1e-12));

        const double eps = 0.01;
        const DistributionGrid tilted =
            make_lattice(g, 2, [&](const Eigen::Vector3d&, const PhasePoint& x) { return M(x) * (1 + eps * x.v(0)); });
        const DefectMoments d = defect_moments(tilted, p);
        const double volume = std::pow(2.0 * M_PI, 3);
        CHECK(d.momentum(0) == doctest::Approx(eps * volume * moment_identity(MomentKind::V2) *
                                               moment_identity(MomentKind::I0, p)).epsilon(1e-12));

        // linearity in F
        const DistributionGrid a = make_homogeneous(g, [&](const PhasePoint& x) { return M(x) * (1 + x.v(1)); });
        const DistributionGrid b = make_homogeneous(g, [&](const PhasePoint& x) { return M(x) * (1 + x.i); });
        DistributionGrid ab = a;
        for (std::size_t n = 0; n < ab.values.size(); ++n)
            ab.values[n] = a.values[n] + b.values[n] - M(g.point(n));
        const DefectMoments da = defect_moments(a, p), db = defect_moments(b, p), dab = defect_moments(ab, p);
        CHECK(dab.mass == doctest::Approx(da.mass + db.mass));
        CHECK(dab.energy == doctest::Approx(da.energy + db.energy));
        CHECK(dab.momentum(1) == doctest::Approx(da.momentum(1) + db.momentum(1)));
    }
    ModelParams other;
    other.delta = 4.0;
    const PhaseGrid g = make_phase_grid(ModelParams{}, 4, 2);
    CHECK_THROWS_AS(defect_moments(make_homogeneous(g, [](const PhasePoint&) { return 1.0; }), other), UsageError);
}

TEST_CASE("parameter validation")
{
    ModelParams p;
    CHECK_NOTHROW(p.validate());
    p.alpha = 3.0;
    CHECK_THROWS_AS(p.validate(), ConfigError);
    p = ModelParams{};
    p.delta = 1.5;
    CHECK_THROWS_AS(p.validate(), ConfigError);
    p = ModelParams{};
    p.beta = 5.0;
    CHECK_THROWS_AS(p.validate(), ConfigError);
}

TEST_CASE("tensor modal transform round trip and orthonormality")
{
    ModelParams p;
    p.delta = 3.0;
    const PhaseGrid g = make_phase_grid(p, 5, 3);
    const TensorModal modal(g);
    Eigen::VectorXd c = Eigen::VectorXd::Zero(Eigen::Index(modal.size()));
    for (Eigen::Index k = 0; k < c.size(); ++k)
        c(k) = std::sin(1.0 + 0.37 * double(k)) / (1.0 + double(k));
    std::vector<double> F(modal.size());
    modal.to_nodal(c, F.data());
    const Eigen::VectorXd back = modal.to_modal(F.data());
    CHECK((back - c).norm() < 1e-11);
    const PhasePoint x{Eigen::Vector3d(0.3, -0.7, 1.1), 0.8};
    std::vector<double> vals(modal.size());
    modal.basis_values(x.v, x.i, vals.data());
    double direct = 0.0;
    for (Eigen::Index k = 0; k < c.size(); ++k)
        direct += c(k) * vals[std::size_t(k)];
    CHECK(modal.phi(c, x.v, x.i) == doctest::Approx(direct).epsilon(1e-13));
}

#include "polykin/quadrature.hpp"

#include "polykin/errors.hpp"

#include <Eigen/Dense>
#include <boost/math/special_functions/beta.hpp>
#include <boost/math/special_functions/gamma.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>

namespace polykin {

void QuadratureSpec::validate() const
{
    auto positive = [](auto value, const char* name) {
        if (!(value > 0))
            throw ConfigError(std::string("quadrature setting '") + name + "' must be positive");
    };
    positive(nu_radial, "nu_radial");
    positive(nu_polar, "nu_polar");
    positive(nu_internal, "nu_internal");
    positive(k2_transverse, "k2_transverse");
    positive(k2_parallel, "k2_parallel");
    positive(k2_tol, "k2_tol");
    positive(mc_samples, "mc_samples");
    positive(kernel_samples, "kernel_samples");
    positive(l_samples, "l_samples");
    positive(relax_samples, "relax_samples");
    positive(picard_samples, "picard_samples");
    positive(gamma_tensor_samples, "gamma_tensor_samples");
    positive(grid_velocity, "grid_velocity");
    positive(grid_energy, "grid_energy");
    positive(time_panels, "time_panels");
    positive(time_nodes, "time_nodes");
}

namespace {

/// Golub-Welsch: nodes are eigenvalues of the Jacobi matrix, weights come from
/// the first eigenvector components scaled by the total mass of the weight.
Rule golub_welsch(const Eigen::VectorXd& diag, const Eigen::VectorXd& off, double mass)
{
    const int n = static_cast<int>(diag.size());
    Eigen::MatrixXd J = Eigen::MatrixXd::Zero(n, n);
    for (int i = 0; i < n; ++i) {
        J(i, i) = diag(i);
        if (i + 1 < n) {
            J(i, i + 1) = off(i);
            J(i + 1, i) = off(i);
        }
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(J);
    if (es.info() != Eigen::Success)
        throw NumericError("Golub-Welsch eigen-solve failed");
    Rule r;
    r.nodes.resize(n);
    r.weights.resize(n);
    for (int i = 0; i < n; ++i) {
        r.nodes[i] = es.eigenvalues()(i);
        const double q = es.eigenvectors()(0, i);
        r.weights[i] = mass * q * q;
    }
    return r;
}

void check_count(int n)
{
    if (n < 1)
        throw UsageError("quadrature rule needs at least one node");
    if (n > 400)
        throw CapacityError("quadrature rule with more than 400 nodes requested");
}

} // namespace

Rule gauss_hermite(int n)
{
    check_count(n);
    Eigen::VectorXd d = Eigen::VectorXd::Zero(n);
    Eigen::VectorXd o(std::max(n - 1, 0));
    for (int k = 0; k + 1 < n; ++k)
        o(k) = std::sqrt(double(k + 1));
    Rule r = golub_welsch(d, o, std::sqrt(2.0 * M_PI));
    // symmetrize to remove eigen-solver round-off
    for (int i = 0; i < n / 2; ++i) {
        const int j = n - 1 - i;
        const double x = 0.5 * (r.nodes[j] - r.nodes[i]);
        const double w = 0.5 * (r.weights[i] + r.weights[j]);
        r.nodes[i] = -x;
        r.nodes[j] = x;
        r.weights[i] = r.weights[j] = w;
    }
    if (n % 2 == 1)
        r.nodes[n / 2] = 0.0;
    return r;
}

Rule gauss_laguerre(int n, double a)
{
    check_count(n);
    if (!(a > -1.0))
        throw DomainError("generalized Laguerre parameter must exceed -1");
    Eigen::VectorXd d(n);
    Eigen::VectorXd o(std::max(n - 1, 0));
    for (int k = 0; k < n; ++k)
        d(k) = 2.0 * k + a + 1.0;
    for (int k = 0; k + 1 < n; ++k)
        o(k) = std::sqrt((k + 1.0) * (k + 1.0 + a));
    return golub_welsch(d, o, std::tgamma(a + 1.0));
}

Rule gauss_jacobi(int n, double a, double b)
{
    check_count(n);
    if (!(a > -1.0) || !(b > -1.0))
        throw DomainError("Jacobi parameters must exceed -1");
    Eigen::VectorXd d(n);
    Eigen::VectorXd o(std::max(n - 1, 0));
    for (int k = 0; k < n; ++k) {
        const double s = 2.0 * k + a + b;
        if (k == 0)
            d(k) = (b - a) / (a + b + 2.0);
        else
            d(k) = (b * b - a * a) / (s * (s + 2.0));
    }
    for (int k = 1; k < n; ++k) {
        const double s = 2.0 * k + a + b;
        const double num = 4.0 * k * (k + a) * (k + b) * (k + a + b);
        const double den = s * s * (s + 1.0) * (s - 1.0);
        o(k - 1) = std::sqrt(num / den);
    }
    const double mass = std::pow(2.0, a + b + 1.0) * boost::math::beta(a + 1.0, b + 1.0);
    return golub_welsch(d, o, mass);
}

Rule gauss_legendre(int n)
{
    Rule r = gauss_jacobi(n, 0.0, 0.0);
    for (int i = 0; i < n / 2; ++i) {
        const int j = n - 1 - i;
        const double x = 0.5 * (r.nodes[j] - r.nodes[i]);
        const double w = 0.5 * (r.weights[i] + r.weights[j]);
        r.nodes[i] = -x;
        r.nodes[j] = x;
        r.weights[i] = r.weights[j] = w;
    }
    if (n % 2 == 1)
        r.nodes[n / 2] = 0.0;
    return r;
}

Rule gauss_legendre(int n, double lo, double hi)
{
    Rule r = gauss_legendre(n);
    const double h = 0.5 * (hi - lo);
    const double c = 0.5 * (hi + lo);
    for (std::size_t i = 0; i < r.size(); ++i) {
        r.nodes[i] = c + h * r.nodes[i];
        r.weights[i] *= h;
    }
    return r;
}

double fit_slope(const std::vector<double>& x, const std::vector<double>& y)
{
    if (x.size() != y.size() || x.size() < 2)
        throw UsageError("fit_slope needs two equally sized series of length >= 2");
    const double n = double(x.size());
    const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
    const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
    double sxy = 0.0, sxx = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxy += (x[i] - mx) * (y[i] - my);
        sxx += (x[i] - mx) * (x[i] - mx);
    }
    if (sxx == 0.0)
        throw NumericError("fit_slope: degenerate abscissae");
    return sxy / sxx;
}

} // namespace polykin

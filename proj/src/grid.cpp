#include "polykin/grid.hpp"

#include "polykin/errors.hpp"

#include <cmath>

namespace polykin {

void hermite_values(int n, double x, double* out)
{
    out[0] = 1.0;
    if (n >= 1)
        out[1] = x;
    for (int k = 1; k < n; ++k)
        out[k + 1] = (x * out[k] - std::sqrt(double(k)) * out[k - 1]) / std::sqrt(double(k + 1));
}

void laguerre_values(int n, double a, double x, double* out)
{
    // unnormalized recurrence, then scale by sqrt(k! Gamma(a+1) / Gamma(k+a+1))
    out[0] = 1.0;
    if (n >= 1)
        out[1] = 1.0 + a - x;
    for (int k = 1; k < n; ++k)
        out[k + 1] = ((2.0 * k + 1.0 + a - x) * out[k] - (k + a) * out[k - 1]) / (k + 1.0);
    double scale = 1.0; // running sqrt(k! Gamma(a+1)/Gamma(k+a+1))
    for (int k = 1; k <= n; ++k) {
        scale *= std::sqrt(double(k) / (k + a));
        out[k] *= scale;
    }
}

Eigen::Vector3d PhaseGrid::velocity(std::size_t n) const
{
    std::size_t r = n / n_i;
    const int c = int(r % n_v);
    r /= n_v;
    const int b = int(r % n_v);
    const int a = int(r / n_v);
    return {v_rule.nodes[a], v_rule.nodes[b], v_rule.nodes[c]};
}

double PhaseGrid::quad_weight(std::size_t n) const
{
    std::size_t r = n / n_i;
    const int j = int(n % n_i);
    const int c = int(r % n_v);
    r /= n_v;
    const int b = int(r % n_v);
    const int a = int(r / n_v);
    auto wv = [this](int k) {
        const double x = v_rule.nodes[k];
        return v_rule.weights[k] * std::exp(0.5 * x * x);
    };
    const double x = i_rule.nodes[j];
    const double wi = i_rule.weights[j] * std::exp(x) / std::pow(x, params.laguerre_a());
    return wv(a) * wv(b) * wv(c) * wi;
}

double PhaseGrid::velocity_radius() const
{
    return std::sqrt(3.0) * v_rule.nodes.back();
}

PhaseGrid make_phase_grid(const ModelParams& params, int n_v, int n_i)
{
    if (n_v < 1 || n_i < 1)
        throw UsageError("phase grid needs at least one node per direction");
    if (std::size_t(n_v) * n_v * n_v * n_i > 200000)
        throw CapacityError("phase grid exceeds 200000 nodes");
    PhaseGrid g;
    g.params = params;
    g.n_v = n_v;
    g.n_i = n_i;
    g.v_rule = gauss_hermite(n_v);
    g.i_rule = gauss_laguerre(n_i, params.laguerre_a());
    return g;
}

double DistributionGrid::cell_volume() const
{
    if (n_x == 0)
        return 1.0;
    const double h = 2.0 * M_PI / n_x;
    return h * h * h;
}

Eigen::Vector3d DistributionGrid::cell_position(std::size_t c) const
{
    if (n_x == 0)
        return Eigen::Vector3d::Zero();
    const double h = 2.0 * M_PI / n_x;
    const int k = int(c % n_x);
    const int j = int((c / n_x) % n_x);
    const int i = int(c / (std::size_t(n_x) * n_x));
    return {h * i, h * j, h * k};
}

DistributionGrid make_homogeneous(const PhaseGrid& phase, const std::function<double(const PhasePoint&)>& F)
{
    DistributionGrid g;
    g.phase = phase;
    g.values.resize(phase.size());
    for (std::size_t n = 0; n < phase.size(); ++n)
        g.values[n] = F(phase.point(n));
    return g;
}

DistributionGrid make_lattice(const PhaseGrid& phase, int n_x,
                              const std::function<double(const Eigen::Vector3d&, const PhasePoint&)>& F)
{
    if (n_x < 1)
        throw UsageError("lattice needs at least one cell per axis");
    if (n_x > 8)
        throw CapacityError("torus lattice is limited to 8 cells per axis");
    DistributionGrid g;
    g.phase = phase;
    g.n_x = n_x;
    g.values.resize(g.cells() * phase.size());
    for (std::size_t c = 0; c < g.cells(); ++c) {
        const Eigen::Vector3d x = g.cell_position(c);
        double* vals = g.cell(c);
        for (std::size_t n = 0; n < phase.size(); ++n)
            vals[n] = F(x, phase.point(n));
    }
    return g;
}

DefectMoments defect_moments(const DistributionGrid& F, const ModelParams& params)
{
    const PhaseGrid& ph = F.phase;
    if (ph.params.delta != params.delta)
        throw UsageError("defect_moments: grid was built for a different delta");
    if (F.values.size() != F.cells() * ph.size())
        throw UsageError("defect_moments: value array does not match the grid");
    DefectMoments d;
    const double vol = F.cell_volume();
    for (std::size_t c = 0; c < F.cells(); ++c) {
        const double* vals = F.cell(c);
        for (std::size_t n = 0; n < ph.size(); ++n) {
            const PhasePoint p = ph.point(n);
            const double g = vol * ph.quad_weight(n) * (vals[n] - maxwellian(p, params));
            d.mass += g;
            d.momentum += g * p.v;
            d.energy += g * (p.v.squaredNorm() + 2.0 * p.i);
        }
    }
    return d;
}

TensorModal::TensorModal(const PhaseGrid& grid)
    : grid_(grid), nb_(grid.size())
{
    if (nb_ > 5000)
        throw CapacityError("tensor modal space limited to 5000 functions");
    nodal_.resize(Eigen::Index(nb_), Eigen::Index(nb_));
    m_nodes_.resize(nb_);
    qm_.resize(nb_);
    std::vector<double> row(nb_);
    for (std::size_t n = 0; n < nb_; ++n) {
        const PhasePoint p = grid_.point(n);
        basis_values(p.v, p.i, row.data());
        for (std::size_t k = 0; k < nb_; ++k)
            nodal_(Eigen::Index(n), Eigen::Index(k)) = row[k];
        m_nodes_[n] = maxwellian(p, grid_.params);
        qm_[n] = grid_.quad_weight(n) * m_nodes_[n];
    }
}

void TensorModal::basis_values(const Eigen::Vector3d& v, double i, double* out) const
{
    const int nv = grid_.n_v, ni = grid_.n_i;
    double h1[64], h2[64], h3[64], l[64];
    hermite_values(nv - 1, v(0), h1);
    hermite_values(nv - 1, v(1), h2);
    hermite_values(nv - 1, v(2), h3);
    laguerre_values(ni - 1, grid_.params.laguerre_a(), i, l);
    std::size_t k = 0;
    for (int a = 0; a < nv; ++a)
        for (int b = 0; b < nv; ++b) {
            const double ab = h1[a] * h2[b];
            for (int c = 0; c < nv; ++c) {
                const double abc = ab * h3[c];
                for (int j = 0; j < ni; ++j)
                    out[k++] = abc * l[j];
            }
        }
}

Eigen::VectorXd TensorModal::to_modal(const double* F) const
{
    Eigen::VectorXd phi_w(static_cast<Eigen::Index>(nb_));
    for (std::size_t n = 0; n < nb_; ++n)
        phi_w(Eigen::Index(n)) = grid_.quad_weight(n) * F[n]; // q * M * (F/M)
    return nodal_.transpose() * phi_w;
}

void TensorModal::to_nodal(const Eigen::VectorXd& c, double* F) const
{
    const Eigen::VectorXd phi = nodal_ * c;
    for (std::size_t n = 0; n < nb_; ++n)
        F[n] = m_nodes_[n] * phi(Eigen::Index(n));
}

double TensorModal::phi(const Eigen::VectorXd& c, const Eigen::Vector3d& v, double i) const
{
    const int nv = grid_.n_v, ni = grid_.n_i;
    double h1[64], h2[64], h3[64], l[64];
    hermite_values(nv - 1, v(0), h1);
    hermite_values(nv - 1, v(1), h2);
    hermite_values(nv - 1, v(2), h3);
    laguerre_values(ni - 1, grid_.params.laguerre_a(), i, l);
    const double* cp = c.data();
    double total = 0.0;
    for (int a = 0; a < nv; ++a) {
        double sa = 0.0;
        for (int b = 0; b < nv; ++b) {
            double sb = 0.0;
            for (int cc = 0; cc < nv; ++cc) {
                double sc = 0.0;
                for (int j = 0; j < ni; ++j)
                    sc += cp[j] * l[j];
                cp += ni;
                sb += sc * h3[cc];
            }
            sa += sb * h2[b];
        }
        total += sa * h1[a];
    }
    return total;
}

PhaseFunction modal_function(const TensorModal& modal, const Eigen::VectorXd& c)
{
    const ModelParams params = modal.grid().params;
    return [&modal, c, params](const Eigen::Vector3d& v, double i) {
        return maxwellian_ext(v, i, params) * modal.phi(c, v, i);
    };
}

} // namespace polykin

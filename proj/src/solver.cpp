#include "polykin/solver.hpp"

#include "polykin/collision.hpp"
#include "polykin/errors.hpp"
#include "polykin/frequency_kernel.hpp"
#include "polykin/rng.hpp"

#include <unsupported/Eigen/MatrixFunctions>

#include <algorithm>
#include <cmath>
#include <limits>

namespace polykin {

namespace {

constexpr std::uint64_t kTagPicard = 0x81;
constexpr std::uint64_t kTagRelax = 0x82;
constexpr std::uint64_t kTagGamma = 0x83;

using Cd = std::complex<double>;

double collision_rate(double phi, const ModelParams& params, double kappa)
{
    return kappa * std::pow(phi, 1.0 - 0.5 * params.alpha);
}

/// Lagrange basis polynomial r on the nodes `x`, evaluated at t.
double lagrange(const std::vector<double>& x, std::size_t r, double t)
{
    double v = 1.0;
    for (std::size_t s = 0; s < x.size(); ++s)
        if (s != r)
            v *= (t - x[s]) / (x[r] - x[s]);
    return v;
}

/**
 * Reference-panel tables for the Duhamel integral on [0, 1].
 *
 * For each target tau (the m interior nodes, then the panel end) the integral
 * over [0, tau] is taken with a fine Gauss rule. `inner` holds the integrals of
 * the Lagrange basis from 0 to each fine point, used for the loss exponent.
 */
struct PanelTables {
    std::vector<double> nodes;                           // interpolation nodes in (0, 1)
    std::vector<std::vector<double>> fine_w;             // [target][j]
    std::vector<std::vector<std::vector<double>>> fine_l; // [target][j][r]
    std::vector<std::vector<std::vector<double>>> inner;  // [target][j][r]
    std::vector<std::vector<double>> whole;              // [target][r] = int_0^tau l_r
};

PanelTables panel_tables(int m, int n_fine)
{
    PanelTables t;
    t.nodes = gauss_legendre(m, 0.0, 1.0).nodes;
    std::vector<double> targets = t.nodes;
    targets.push_back(1.0);
    const auto integral = [&](std::size_t r, double hi) {
        const Rule g = gauss_legendre(m, 0.0, hi);
        double s = 0.0;
        for (std::size_t q = 0; q < g.size(); ++q)
            s += g.weights[q] * lagrange(t.nodes, r, g.nodes[q]);
        return s;
    };
    for (double tau : targets) {
        const Rule f = gauss_legendre(n_fine, 0.0, tau);
        std::vector<std::vector<double>> fl, in;
        for (std::size_t j = 0; j < f.size(); ++j) {
            std::vector<double> a(static_cast<std::size_t>(m)), b(static_cast<std::size_t>(m));
            for (std::size_t r = 0; r < std::size_t(m); ++r) {
                a[r] = lagrange(t.nodes, r, f.nodes[j]);
                b[r] = integral(r, f.nodes[j]);
            }
            fl.push_back(a);
            in.push_back(b);
        }
        std::vector<double> wh(static_cast<std::size_t>(m));
        for (std::size_t r = 0; r < std::size_t(m); ++r)
            wh[r] = integral(r, tau);
        t.fine_w.push_back(f.weights);
        t.fine_l.push_back(fl);
        t.inner.push_back(in);
        t.whole.push_back(wh);
    }
    return t;
}

/// Solution of y' = -g y + src, y(0) = y0, at the time nodes of all panels.
void duhamel(const PanelTables& tab, double h, int panels, double y0, const double* g, const double* src,
             double* out)
{
    const std::size_t m = tab.nodes.size();
    double G0 = 0.0, D0 = 0.0;
    for (int p = 0; p < panels; ++p) {
        const double* gp = g + std::size_t(p) * m;
        const double* qp = src + std::size_t(p) * m;
        for (std::size_t t = 0; t <= m; ++t) {
            double G = G0;
            for (std::size_t r = 0; r < m; ++r)
                G += h * tab.whole[t][r] * gp[r];
            double D = D0;
            for (std::size_t j = 0; j < tab.fine_w[t].size(); ++j) {
                double Gs = G0, qs = 0.0;
                for (std::size_t r = 0; r < m; ++r) {
                    Gs += h * tab.inner[t][j][r] * gp[r];
                    qs += tab.fine_l[t][j][r] * qp[r];
                }
                D += h * tab.fine_w[t][j] * std::exp(Gs) * qs;
            }
            if (t < m)
                out[std::size_t(p) * m + t] = std::exp(-G) * (y0 + D);
            else {
                G0 = G;
                D0 = D;
            }
        }
    }
}

double grid_inf_norm(const Eigen::MatrixXd& A)
{
    return A.size() == 0 ? 0.0 : A.cwiseAbs().maxCoeff();
}

} // namespace

// ---------------------------------------------------------------- Picard sequence

double t1_horizon(double f0_norm, double c1)
{
    if (!(c1 > 0.0) || !std::isfinite(c1))
        throw UsageError("t1_horizon: c1 must be positive");
    if (!(f0_norm >= 0.0) || !std::isfinite(f0_norm))
        throw UsageError("t1_horizon: f0_norm must be finite and nonnegative");
    return 1.0 / (8.0 * c1 * (1.0 + f0_norm));
}

std::vector<IterationReport> picard_iterate(const DistributionGrid& f0, double T, int n_iters,
                                            const ModelParams& params, const QuadratureSpec& quad)
{
    params.validate();
    quad.validate();
    if (f0.n_x != 0)
        throw UsageError("picard_iterate: f0 must be homogeneous");
    if (!(T > 0.0) || !std::isfinite(T))
        throw UsageError("picard_iterate: T must be positive");
    if (n_iters < 1)
        throw UsageError("picard_iterate: n_iters must be >= 1");
    if (quad.picard_samples < 1)
        throw UsageError("picard_iterate: picard_samples must be >= 1");

    const PhaseGrid& phase = f0.phase;
    const TensorModal modal(phase);
    const std::size_t N = phase.size();
    const auto& Mn = modal.node_maxwellian();
    std::vector<double> w(N), sw(N), dev0(N);
    for (std::size_t n = 0; n < N; ++n) {
        w[n] = weight(phase.point(n), params);
        sw[n] = std::sqrt(w[n]);
        dev0[n] = std::sqrt(Mn[n]) * f0.values[n];
        if (Mn[n] + dev0[n] < 0.0)
            throw PreconditionError("picard_iterate: M + sqrt(M) f0 is negative at a node");
    }

    const int panels = quad.time_panels, m = quad.time_nodes;
    const std::size_t Q = std::size_t(panels) * std::size_t(m);
    const PanelTables tab = panel_tables(m, 8);
    const double h = T / panels;
    const double kappa = collision_kappa(params);
    const std::int64_t S = quad.picard_samples;
    const std::size_t nb = modal.size();

    // coefficients of phi^n at the time nodes; phi^0 = 1
    Eigen::MatrixXd C = Eigen::MatrixXd::Zero(Eigen::Index(nb), Eigen::Index(Q));
    C.row(0).setOnes();
    Eigen::MatrixXd f_prev = Eigen::MatrixXd::Zero(Eigen::Index(N), Eigen::Index(Q));

    std::vector<IterationReport> out;
    IterationReport r0;
    r0.min_F = *std::min_element(Mn.begin(), Mn.end());
    out.push_back(r0);

    Eigen::MatrixXd Py(Eigen::Index(nb), S), Pp(Eigen::Index(nb), S), Pq(Eigen::Index(nb), S);
    Eigen::VectorXd rate(S);
    std::vector<double> g(Q), src(Q), dev(Q);
    // deviation F^{n+1} - M: its source Q+ - g M vanishes at M sample by sample
    Eigen::MatrixXd Dnew(static_cast<Eigen::Index>(N), static_cast<Eigen::Index>(Q));

    for (int it = 1; it <= n_iters; ++it) {
        for (std::size_t n = 0; n < N; ++n) {
            const PhasePoint x = phase.point(n);
            RandomStream rng(block_seed(quad.seed, kTagPicard, n));
            for (std::int64_t s = 0; s < S; ++s) {
                CollisionPair pair{x, {rng.normal3(), rng.gamma(0.5 * params.delta)}};
                const CollisionParams cp = sample_collision_params(rng, params);
                const PostCollisionState post = post_collision(pair, cp);
                rate(s) = collision_rate(total_energy_phi(pair), params, kappa);
                modal.basis_values(pair.p_star.v, pair.p_star.i, Py.col(s).data());
                modal.basis_values(post.p_prime.v, post.p_prime.i, Pp.col(s).data());
                modal.basis_values(post.p_star_prime.v, post.p_star_prime.i, Pq.col(s).data());
            }
            const Eigen::MatrixXd Vy = Py.transpose() * C;
            const Eigen::MatrixXd Vp = Pp.transpose() * C;
            const Eigen::MatrixXd Vq = Pq.transpose() * C;
            for (std::size_t q = 0; q < Q; ++q) {
                const Eigen::Index qi = Eigen::Index(q);
                g[q] = rate.dot(Vy.col(qi)) / double(S);
                src[q] = Mn[n] * rate.dot(Vp.col(qi).cwiseProduct(Vq.col(qi)) - Vy.col(qi)) / double(S);
            }
            duhamel(tab, h, panels, dev0[n], g.data(), src.data(), dev.data());
            for (std::size_t q = 0; q < Q; ++q)
                Dnew(Eigen::Index(n), Eigen::Index(q)) = dev[q];
        }

        IterationReport rep;
        rep.n = it;
        rep.min_F = std::numeric_limits<double>::infinity();
        for (std::size_t n = 0; n < N; ++n)
            rep.min_F = std::min(rep.min_F, Mn[n] + Dnew.row(Eigen::Index(n)).minCoeff());
        if (rep.min_F < -1e-12)
            throw NumericError("picard_iterate: negative iterate F^" + std::to_string(it));
        Eigen::MatrixXd f(static_cast<Eigen::Index>(N), static_cast<Eigen::Index>(Q));
        for (std::size_t n = 0; n < N; ++n) {
            const double sm = std::sqrt(Mn[n]);
            for (std::size_t q = 0; q < Q; ++q)
                f(Eigen::Index(n), Eigen::Index(q)) = Dnew(Eigen::Index(n), Eigen::Index(q)) / sm;
        }
        const Eigen::Map<const Eigen::VectorXd> wv(w.data(), Eigen::Index(N));
        const Eigen::Map<const Eigen::VectorXd> swv(sw.data(), Eigen::Index(N));
        rep.sup_norm = grid_inf_norm(wv.asDiagonal() * f);
        rep.diff_norm = grid_inf_norm(swv.asDiagonal() * (f - f_prev));
        const IterationReport& prev = out.back();
        // once the iteration has converged to roundoff the ratio carries no information
        if (it >= 2 && prev.diff_norm > 1e-12 * std::max(prev.sup_norm, rep.sup_norm)) {
            rep.ratio = rep.diff_norm / prev.diff_norm;
            rep.has_ratio = true;
        }
        out.push_back(rep);
        f_prev = f;
        for (std::size_t q = 0; q < Q; ++q) {
            C.col(Eigen::Index(q)) = modal.to_modal(Dnew.col(Eigen::Index(q)).data());
            C(0, Eigen::Index(q)) += 1.0;
        }
    }
    return out;
}

// ---------------------------------------------------------------- homogeneous relaxation

double MaxwellianFit::operator()(const Eigen::Vector3d& v, double i, const ModelParams& params) const
{
    if (i <= 0.0)
        throw DomainError("MaxwellianFit: I must be positive");
    const double T = temperature;
    const double a = params.laguerre_a();
    const double gv = std::exp(-(v - velocity).squaredNorm() / (2.0 * T)) / std::pow(2.0 * M_PI * T, 1.5);
    const double gi = std::pow(i, a) * std::exp(-i / T) / (std::pow(T, 0.5 * params.delta) * gamma_fn(0.5 * params.delta));
    return density * gv * gi;
}

MaxwellianFit fit_maxwellian(const DistributionGrid& F, const ModelParams& params)
{
    double rho = 0.0, e = 0.0;
    Eigen::Vector3d mom = Eigen::Vector3d::Zero();
    for (std::size_t c = 0; c < F.cells(); ++c) {
        const double* f = F.cell(c);
        for (std::size_t n = 0; n < F.phase.size(); ++n) {
            const PhasePoint p = F.phase.point(n);
            const double q = F.phase.quad_weight(n) * F.cell_volume() * f[n];
            rho += q;
            mom += q * p.v;
            e += q * (p.v.squaredNorm() + 2.0 * p.i);
        }
    }
    if (!(rho > 0.0))
        throw DomainError("fit_maxwellian: nonpositive mass");
    MaxwellianFit fit;
    fit.density = rho;
    fit.velocity = mom / rho;
    fit.temperature = (e / rho - fit.velocity.squaredNorm()) / (3.0 + params.delta);
    if (!(fit.temperature > 0.0))
        throw DomainError("fit_maxwellian: nonpositive temperature");
    return fit;
}

DistributionGrid bimodal_initial(const PhaseGrid& phase, double separation)
{
    const double a = separation;
    const double s2 = 1.0 - a * a / 3.0;
    if (!(a >= 0.0) || !(s2 > 0.0))
        throw UsageError("bimodal_initial: separation must lie in [0, sqrt(3))");
    const ModelParams& params = phase.params;
    const double ia = params.laguerre_a();
    const double gnorm = gamma_fn(0.5 * params.delta);
    DistributionGrid F = make_homogeneous(phase, [&](const PhasePoint& p) {
        const Eigen::Vector3d shift(a, 0.0, 0.0);
        const double g = std::exp(-(p.v - shift).squaredNorm() / (2.0 * s2)) +
                         std::exp(-(p.v + shift).squaredNorm() / (2.0 * s2));
        return 0.5 * g / std::pow(2.0 * M_PI * s2, 1.5) * std::pow(p.i, ia) * std::exp(-p.i) / gnorm;
    });
    // multiplicative (1, E) correction so that the grid mass and energy equal those of M
    double m0 = 0.0, m1 = 0.0, m2 = 0.0;
    for (std::size_t n = 0; n < phase.size(); ++n) {
        const PhasePoint p = phase.point(n);
        const double E = p.v.squaredNorm() + 2.0 * p.i;
        const double q = phase.quad_weight(n) * F.values[n];
        m0 += q;
        m1 += q * E;
        m2 += q * E * E;
    }
    Eigen::Matrix2d A;
    A << m0, m1, m1, m2;
    const Eigen::Vector2d coef = A.fullPivLu().solve(Eigen::Vector2d(1.0, 3.0 + params.delta));
    for (std::size_t n = 0; n < phase.size(); ++n) {
        const PhasePoint p = phase.point(n);
        F.values[n] *= coef(0) + coef(1) * (p.v.squaredNorm() + 2.0 * p.i);
        if (!(F.values[n] > 0.0))
            throw NumericError("bimodal_initial: correction made a node value nonpositive");
    }
    return F;
}

namespace {

/// Weak-form Galerkin rate dc/dt for F = M sum c_k p_k and the entropy-production estimate.
struct RelaxRhs {
    Eigen::VectorXd r;
    Eigen::VectorXd r_se;
    double dh = 0.0;
    double dh_se = 0.0;
};

/**
 * Weak-form rate on a fixed stratified rule. Samples come in strata of
 * `per_node` draws; the standard errors use the spread inside each stratum.
 */
RelaxRhs relax_rhs(const TensorModal& modal, const Eigen::VectorXd& c, const Eigen::VectorXd& log_coef,
                   const std::vector<WeightedMeasureSample>& rule, std::int64_t per_node)
{
    const Eigen::Index nb = Eigen::Index(modal.size());
    const Eigen::Index k = Eigen::Index(per_node);
    const Eigen::Index nodes_per_batch = std::max<Eigen::Index>(1, 256 / k);
    const Eigen::Index batch = nodes_per_batch * k;
    Eigen::MatrixXd P0(nb, batch), P1(nb, batch), P2(nb, batch), P3(nb, batch);
    Eigen::VectorXd wgt(batch);
    Eigen::VectorXd sum = Eigen::VectorXd::Zero(nb), var = Eigen::VectorXd::Zero(nb);
    double s1 = 0.0, v1 = 0.0;
    const Eigen::Index total = Eigen::Index(rule.size());
    for (Eigen::Index b0 = 0; b0 < total; b0 += batch) {
        const Eigen::Index nbt = std::min(batch, total - b0);
        for (Eigen::Index s = 0; s < nbt; ++s) {
            const WeightedMeasureSample& ws = rule[std::size_t(b0 + s)];
            wgt(s) = ws.weight;
            modal.basis_values(ws.s.v, ws.s.i, P0.col(s).data());
            modal.basis_values(ws.s.vs, ws.s.is, P1.col(s).data());
            modal.basis_values(ws.s.vp, ws.s.ip, P2.col(s).data());
            modal.basis_values(ws.s.vsp, ws.s.isp, P3.col(s).data());
        }
        const Eigen::MatrixXd D = P2.leftCols(nbt) + P3.leftCols(nbt) - P0.leftCols(nbt) - P1.leftCols(nbt);
        const Eigen::VectorXd a0 = P0.leftCols(nbt).transpose() * c;
        const Eigen::VectorXd a1 = P1.leftCols(nbt).transpose() * c;
        const Eigen::VectorXd a2 = P2.leftCols(nbt).transpose() * c;
        const Eigen::VectorXd a3 = P3.leftCols(nbt).transpose() * c;
        const Eigen::VectorXd wt =
            0.25 * wgt.head(nbt).cwiseProduct(a0.cwiseProduct(a1) - a2.cwiseProduct(a3));
        const Eigen::MatrixXd Y = D * wt.asDiagonal();
        const Eigen::VectorXd e = wt.cwiseProduct(D.transpose() * log_coef);
        sum += Y.rowwise().sum();
        s1 += e.sum();
        for (Eigen::Index n0 = 0; n0 + k <= nbt && k > 1; n0 += k) {
            // k * (within-stratum sample variance) / k^2 per stratum total
            const Eigen::VectorXd m = Y.middleCols(n0, k).rowwise().mean();
            var += (Y.middleCols(n0, k).colwise() - m).cwiseAbs2().rowwise().sum() * (double(k) / double(k - 1));
            const double me = e.segment(n0, k).mean();
            v1 += (e.segment(n0, k).array() - me).square().sum() * (double(k) / double(k - 1));
        }
    }
    RelaxRhs out;
    out.r = sum;
    out.r_se = var.cwiseSqrt();
    out.dh = s1;
    out.dh_se = std::sqrt(v1);
    return out;
}

} // namespace

RelaxResult homogeneous_relax(const DistributionGrid& F0, double dt, int n_steps, const ModelParams& params,
                              const QuadratureSpec& quad)
{
    params.validate();
    quad.validate();
    if (F0.n_x != 0)
        throw UsageError("homogeneous_relax: F0 must be homogeneous");
    if (!(dt > 0.0) || n_steps < 0)
        throw UsageError("homogeneous_relax: dt must be positive and n_steps nonnegative");
    for (double x : F0.values)
        if (x < 0.0)
            throw UsageError("homogeneous_relax: F0 is negative at a node");

    const PhaseGrid& phase = F0.phase;
    const TensorModal modal(phase);
    const std::size_t N = phase.size();
    const auto& Mn = modal.node_maxwellian();

    RelaxResult result;
    double nu_min = std::numeric_limits<double>::infinity();
    for (std::size_t n = 0; n < N; ++n) {
        const double v = nu(phase.point(n), params, quad);
        result.nu_max = std::max(result.nu_max, v);
        nu_min = std::min(nu_min, v);
    }
    if (dt * result.nu_max > kRelaxStabilityCap)
        throw ConfigError("homogeneous_relax: dt * nu_max = " + std::to_string(dt * result.nu_max) +
                          " exceeds the stability cap");

    DistributionGrid F = F0;
    Eigen::VectorXd c = modal.to_modal(F.values.data());

    const auto log_coefficients = [&](const DistributionGrid& G) {
        // polynomial projection of log(F / M); invariant components drop out of the entropy production
        std::vector<double> lg(N);
        for (std::size_t n = 0; n < N; ++n)
            lg[n] = Mn[n] * std::log(G.values[n] / Mn[n]);
        return modal.to_modal(lg.data());
    };
    const auto record = [&](const DistributionGrid& G, double err, double floor) {
        RelaxRecord r;
        r.t = G.time;
        r.defects = defect_moments(G, params);
        r.entropy = entropy_h(G, params);
        r.entropy_error = err;
        const MaxwellianFit fit = fit_maxwellian(G, params);
        double d2 = 0.0;
        for (std::size_t n = 0; n < N; ++n) {
            const PhasePoint p = phase.point(n);
            const double d = G.values[n] - fit(p.v, p.i, params);
            d2 += phase.quad_weight(n) * d * d / Mn[n];
        }
        r.distance = std::sqrt(d2);
        r.noise_floor = floor;
        return r;
    };
    // One frozen sample set for every step and stage: the sampled operator keeps a
    // negative semidefinite linearization at M, so estimator error cannot accumulate.
    const int n_hermite = (3 * (phase.n_v - 1)) / 2 + 1;
    const int n_phi = phase.n_i + 2;
    const std::int64_t per_node = std::max<std::int64_t>(
        2, quad.relax_samples / std::int64_t(stratified_node_count(n_hermite, n_phi)));
    const auto rule = stratified_collision_rule(params, n_hermite, n_phi, per_node, quad.seed, kTagRelax);
    result.records.push_back(record(F, 0.0, 0.0));

    for (int step = 0; step < n_steps; ++step) {
        const Eigen::VectorXd lc = log_coefficients(F);
        const RelaxRhs k1 = relax_rhs(modal, c, lc, rule, per_node);
        const Eigen::VectorXd c_euler = c + dt * k1.r;
        const RelaxRhs k2 = relax_rhs(modal, c_euler, lc, rule, per_node);
        const Eigen::VectorXd c_new = c + 0.5 * dt * (k1.r + k2.r);

        DistributionGrid G = F;
        G.time = F.time + dt;
        modal.to_nodal(c_new, G.values.data());
        for (double x : G.values)
            if (!(x > 0.0))
                throw NumericError("homogeneous_relax: F lost positivity at a node; reduce dt");
        DistributionGrid E = F;
        modal.to_nodal(c_euler, E.values.data());
        double err = dt * (k1.dh_se + k2.dh_se);
        bool euler_ok = true;
        for (double x : E.values)
            euler_ok = euler_ok && x > 0.0;
        if (euler_ok)
            err += std::abs(entropy_h(G, params) - entropy_h(E, params));
        const double floor = k1.r_se.norm() / nu_min;
        c = c_new;
        F = G;
        result.records.push_back(record(F, err, floor));
    }
    result.final_state = F;
    return result;
}

// ---------------------------------------------------------------- linear modes

DecayRecord linear_mode_evolve(const Eigen::Vector3i& k, const Eigen::VectorXcd& fhat0, double t_end,
                               const SpectralBasis& basis, const OperatorMatrix& Lmat, int n_samples)
{
    if (fhat0.size() != Eigen::Index(basis.size()))
        throw UsageError("linear_mode_evolve: fhat0 does not match the basis");
    if (!(t_end > 0.0) || n_samples < 4)
        throw UsageError("linear_mode_evolve: need t_end > 0 and n_samples >= 4");
    const double norm0 = fhat0.norm();
    if (k.isZero()) {
        const MacroCoefficients mc = macro_extract(fhat0, basis);
        const double macro = std::sqrt(std::norm(mc.a) + mc.b.squaredNorm() + std::norm(mc.c));
        if (macro > 1e-10 * std::max(1.0, norm0))
            throw PreconditionError("linear_mode_evolve: k = 0 data with nonzero defect moments");
    }

    DecayRecord rec;
    rec.k = k;
    const OperatorMatrix G = mode_generator(k, basis, Lmat, QuadratureSpec{});
    const double dt = t_end / n_samples;
    const Eigen::MatrixXcd prop = (G.complex_entries * Cd(dt, 0.0)).exp();

    LyapunovWeight lw;
    if (k.isZero()) {
        rec.spectral_abscissa = -coercivity_gap(Lmat);
    } else {
        rec.spectral_abscissa = spectral_abscissa(G);
        lw = choose_compensator_weight(G);
        rec.eps = lw.eps;
    }

    Eigen::VectorXcd f = fhat0;
    for (int s = 0; s <= n_samples; ++s) {
        if (s > 0)
            f = prop * f;
        rec.times.push_back(s * dt);
        rec.norms.push_back(f.norm());
        rec.lyapunov.push_back(k.isZero() ? f.squaredNorm() : lyapunov_functional(f, k, basis, rec.eps));
    }
    for (std::size_t s = 1; s < rec.lyapunov.size(); ++s)
        if (rec.lyapunov[s] > rec.lyapunov[s - 1] * (1.0 + 1e-12) + 1e-300)
            rec.lyapunov_monotone = false;

    // late window, cut off where roundoff dominates
    std::vector<double> x, y;
    for (std::size_t s = rec.times.size() / 2; s < rec.times.size(); ++s)
        if (rec.norms[s] > 1e-10 * norm0) {
            x.push_back(rec.times[s]);
            y.push_back(std::log(rec.norms[s]));
        }
    if (x.size() < 2)
        throw NumericError("linear_mode_evolve: decay reaches roundoff before the fit window; reduce t_end");
    rec.fitted_rate = -fit_slope(x, y);
    return rec;
}

// ---------------------------------------------------------------- torus mild stepping

Eigen::MatrixXd assemble_gamma_tensor(const SpectralBasis& basis, const QuadratureSpec& quad)
{
    quad.validate();
    const ModelParams& params = basis.params;
    const Eigen::Index nb = Eigen::Index(basis.size());
    const double kappa = collision_kappa(params);
    constexpr Eigen::Index kBatch = 128;
    Eigen::MatrixXd T = Eigen::MatrixXd::Zero(nb, nb * nb);
    Eigen::MatrixXd P0(nb, kBatch), P1(nb, kBatch), P2(nb, kBatch), P3(nb, kBatch);
    Eigen::MatrixXd O(kBatch, nb * nb);
    for_each_block(quad.gamma_tensor_samples, quad.seed, kTagGamma,
                   [&](RandomStream& rng, std::int64_t begin, std::int64_t end) {
                       for (std::int64_t b0 = begin; b0 < end; b0 += kBatch) {
                           const Eigen::Index nbt = Eigen::Index(std::min<std::int64_t>(kBatch, end - b0));
                           for (Eigen::Index s = 0; s < nbt; ++s) {
                               const MeasureSample ms = sample_collision_measure(rng, params, kappa);
                               basis.values(ms.v, ms.i, P0.col(s).data());
                               basis.values(ms.vs, ms.is, P1.col(s).data());
                               basis.values(ms.vp, ms.ip, P2.col(s).data());
                               basis.values(ms.vsp, ms.isp, P3.col(s).data());
                               const double r = 0.25 * ms.rate;
                               for (Eigen::Index j = 0; j < nb; ++j)
                                   for (Eigen::Index i = 0; i < nb; ++i)
                                       O(s, i * nb + j) =
                                           r * (P0(i, s) * P1(j, s) - P2(i, s) * P3(j, s));
                           }
                           const Eigen::MatrixXd D =
                               P2.leftCols(nbt) + P3.leftCols(nbt) - P0.leftCols(nbt) - P1.leftCols(nbt);
                           T.noalias() += D * O.topRows(nbt);
                       }
                   });
    T /= double(quad.gamma_tensor_samples);
    Eigen::MatrixXd Ts(nb, nb * nb);
    for (Eigen::Index i = 0; i < nb; ++i)
        for (Eigen::Index j = 0; j < nb; ++j)
            Ts.col(i * nb + j) = 0.5 * (T.col(i * nb + j) + T.col(j * nb + i));
    return Ts;
}

MildStepper::MildStepper(const PhaseGrid& phase, const SpectralBasis& basis, const OperatorMatrix& L,
                         const QuadratureSpec& quad)
    : phase_(phase), basis_(basis)
{
    if (L.kind != OperatorKind::L || L.basis.size() != basis.size())
        throw UsageError("MildStepper: L does not match the basis");
    if (phase.n_v < basis.n_v + 1 || phase.n_i < basis.n_i + 1)
        throw UsageError("MildStepper: phase grid too coarse to project onto the basis exactly");
    const ModelParams& params = basis.params;
    const std::size_t N = phase.size();
    const Eigen::Index nb = Eigen::Index(basis.size());
    project_.resize(nb, Eigen::Index(N));
    reconstruct_.resize(Eigen::Index(N), nb);
    nu_nodes_.resize(Eigen::Index(N));
    w_nodes_.resize(Eigen::Index(N));
    invariants_.resize(5, Eigen::Index(N));
    invariant_gram_.setZero();
    std::vector<double> p(basis.size());
    for (std::size_t n = 0; n < N; ++n) {
        const PhasePoint x = phase.point(n);
        const double m = maxwellian(x, params);
        const double sm = std::sqrt(m);
        const double q = phase.quad_weight(n);
        basis.values(x.v, x.i, p.data());
        for (Eigen::Index k = 0; k < nb; ++k) {
            reconstruct_(Eigen::Index(n), k) = sm * p[std::size_t(k)];
            project_(k, Eigen::Index(n)) = q * sm * p[std::size_t(k)];
        }
        nu_nodes_(Eigen::Index(n)) = nu(x, params, quad);
        w_nodes_(Eigen::Index(n)) = weight(x, params);
        const Eigen::Matrix<double, 5, 1> psi(1.0, x.v(0), x.v(1), x.v(2), x.v.squaredNorm() + 2.0 * x.i);
        invariants_.col(Eigen::Index(n)) = q * sm * psi;
        invariant_gram_ += q * m * psi * psi.transpose();
    }
    k_gal_ = assemble_nu(basis, quad) - L.entries;
    gamma_ = assemble_gamma_tensor(basis, quad);
}

double MildStepper::sup_norm(const DistributionGrid& h)
{
    double s = 0.0;
    for (double x : h.values)
        s = std::max(s, std::abs(x));
    return s;
}

Eigen::VectorXd MildStepper::source_coefficients(const Eigen::VectorXd& c) const
{
    const Eigen::Index nb = c.size();
    Eigen::MatrixXd outer = c * c.transpose();
    const Eigen::Map<const Eigen::VectorXd> vec(outer.data(), nb * nb);
    // outer is symmetric, so the column-major vec matches the (i*nb + j) layout
    return k_gal_ * c + gamma_ * vec;
}

Eigen::VectorXd MildStepper::invariant_vector(const DistributionGrid& h) const
{
    const Eigen::Index N = Eigen::Index(phase_.size());
    Eigen::VectorXd total = Eigen::VectorXd::Zero(5);
    for (std::size_t c = 0; c < h.cells(); ++c) {
        const Eigen::Map<const Eigen::VectorXd> hc(h.cell(c), N);
        total += invariants_ * hc.cwiseQuotient(w_nodes_);
    }
    return total * h.cell_volume();
}

DefectMoments MildStepper::defects(const DistributionGrid& h) const
{
    const Eigen::VectorXd t = invariant_vector(h);
    DefectMoments d;
    d.mass = t(0);
    d.momentum = t.segment<3>(1);
    d.energy = t(4);
    return d;
}

void MildStepper::restore_invariants(DistributionGrid& h, const Eigen::VectorXd& target) const
{
    const Eigen::VectorXd defect = target - invariant_vector(h);
    const double scale = double(h.cells()) * h.cell_volume();
    const Eigen::Matrix<double, 5, 1> alpha = invariant_gram_.ldlt().solve(defect / scale);
    const Eigen::Index N = Eigen::Index(phase_.size());
    Eigen::VectorXd add(N);
    for (Eigen::Index n = 0; n < N; ++n) {
        const PhasePoint x = phase_.point(std::size_t(n));
        const Eigen::Matrix<double, 5, 1> psi(1.0, x.v(0), x.v(1), x.v(2), x.v.squaredNorm() + 2.0 * x.i);
        // invariants_ carries q sqrt(M) psi; recover sqrt(M) from the first row
        const double sm = invariants_(0, n) / phase_.quad_weight(std::size_t(n));
        add(n) = w_nodes_(n) * sm * alpha.dot(psi);
    }
    for (std::size_t c = 0; c < h.cells(); ++c) {
        Eigen::Map<Eigen::VectorXd> hc(h.cell(c), N);
        hc += add;
    }
}

void MildStepper::transport(const DistributionGrid& in, double dt, DistributionGrid& out) const
{
    out = in;
    if (in.n_x == 0)
        return;
    const int nx = in.n_x;
    const std::size_t N = phase_.size();
    const double spacing = 2.0 * M_PI / nx;
    const auto wrap = [nx](long i) { return std::size_t(((i % nx) + nx) % nx); };
    for (std::size_t n = 0; n < N; ++n) {
        // value at x - v dt, in lattice units
        const Eigen::Vector3d shift = -phase_.velocity(n) * dt / spacing;
        long base[3];
        double frac[3];
        for (int d = 0; d < 3; ++d) {
            const double fl = std::floor(shift(d));
            base[d] = long(fl);
            frac[d] = shift(d) - fl;
        }
        for (int a = 0; a < nx; ++a)
            for (int b = 0; b < nx; ++b)
                for (int c = 0; c < nx; ++c) {
                    double v = 0.0;
                    for (int da = 0; da < 2; ++da)
                        for (int db = 0; db < 2; ++db)
                            for (int dc = 0; dc < 2; ++dc) {
                                const double wgt = (da ? frac[0] : 1.0 - frac[0]) * (db ? frac[1] : 1.0 - frac[1]) *
                                                   (dc ? frac[2] : 1.0 - frac[2]);
                                if (wgt == 0.0)
                                    continue;
                                const std::size_t cell = (wrap(a + base[0] + da) * nx + wrap(b + base[1] + db)) * nx +
                                                         wrap(c + base[2] + dc);
                                v += wgt * in.cell(cell)[n];
                            }
                    out.cell((std::size_t(a) * nx + b) * nx + c)[n] = v;
                }
    }
}

void MildStepper::step(DistributionGrid& h, double dt) const
{
    if (h.phase.size() != phase_.size() || h.phase.n_v != phase_.n_v || h.phase.n_i != phase_.n_i)
        throw UsageError("MildStepper::step: grid does not match the stepper");
    if (!(dt > 0.0))
        throw UsageError("MildStepper::step: dt must be positive");
    const Eigen::VectorXd target = invariant_vector(h);
    const Eigen::Index N = Eigen::Index(phase_.size());

    DistributionGrid src = h;
    for (std::size_t c = 0; c < h.cells(); ++c) {
        const Eigen::Map<const Eigen::VectorXd> hc(h.cell(c), N);
        const Eigen::VectorXd coef = project_ * hc.cwiseQuotient(w_nodes_);
        Eigen::Map<Eigen::VectorXd> sc(src.cell(c), N);
        sc = w_nodes_.cwiseProduct(reconstruct_ * source_coefficients(coef));
    }
    DistributionGrid th, ts;
    transport(h, dt, th);
    transport(src, dt, ts);
    Eigen::VectorXd decay(N), phi1(N);
    for (Eigen::Index n = 0; n < N; ++n) {
        const double z = nu_nodes_(n) * dt;
        decay(n) = std::exp(-z);
        phi1(n) = z > 1e-8 ? -std::expm1(-z) / z : 1.0 - 0.5 * z;
    }
    for (std::size_t c = 0; c < h.cells(); ++c) {
        Eigen::Map<Eigen::VectorXd> out(h.cell(c), N);
        const Eigen::Map<const Eigen::VectorXd> a(th.cell(c), N);
        const Eigen::Map<const Eigen::VectorXd> b(ts.cell(c), N);
        out = decay.cwiseProduct(a) + dt * phi1.cwiseProduct(b);
    }
    restore_invariants(h, target);
    h.time += dt;
}

DistributionGrid torus_mild_step(const DistributionGrid& h, double dt, const ModelParams& params,
                                 const QuadratureSpec& quad)
{
    const int n_v = std::min(4, h.phase.n_v - 1);
    const int n_i = std::min(2, h.phase.n_i - 1);
    const SpectralBasis basis = build_basis(n_v, n_i, params);
    const OperatorMatrix L = assemble_L(basis, quad);
    const MildStepper stepper(h.phase, basis, L, quad);
    DistributionGrid out = h;
    stepper.step(out, dt);
    return out;
}

} // namespace polykin

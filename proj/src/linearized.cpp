#include "polykin/linearized.hpp"

#include "polykin/collision.hpp"
#include "polykin/errors.hpp"
#include "polykin/frequency_kernel.hpp"
#include "polykin/grid.hpp"
#include "polykin/rng.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <string>

namespace polykin {

namespace {

constexpr std::uint64_t kTagWeakForm = 0x71;
constexpr std::uint64_t kTagGain = 0x72;

using Cd = std::complex<double>;

/// Tensor Gauss rule for the Maxwellian probability measure in (v, I).
struct MaxwellRule {
    std::vector<Eigen::Vector3d> v;
    std::vector<double> i;
    std::vector<double> w;
};

MaxwellRule maxwell_rule(int n_h, int n_l, const ModelParams& params)
{
    Rule h = gauss_hermite(n_h);
    Rule l = gauss_laguerre(n_l, params.laguerre_a());
    double mh = 0.0, ml = 0.0;
    for (double x : h.weights)
        mh += x;
    for (double x : l.weights)
        ml += x;
    MaxwellRule r;
    for (int a = 0; a < n_h; ++a)
        for (int b = 0; b < n_h; ++b)
            for (int c = 0; c < n_h; ++c)
                for (int j = 0; j < n_l; ++j) {
                    r.v.emplace_back(h.nodes[a], h.nodes[b], h.nodes[c]);
                    r.i.push_back(l.nodes[j]);
                    r.w.push_back(h.weights[a] * h.weights[b] * h.weights[c] * l.weights[j] /
                                  (mh * mh * mh * ml));
                }
    return r;
}

void require_same_basis(const SpectralBasis& a, const SpectralBasis& b, const char* what)
{
    if (a.n_v != b.n_v || a.n_i != b.n_i || a.params.delta != b.params.delta || a.params.alpha != b.params.alpha)
        throw UsageError(std::string(what) + ": operator and basis differ");
}

Eigen::MatrixXd values_matrix(const SpectralBasis& basis, const std::vector<Eigen::Vector3d>& v,
                              const std::vector<double>& i)
{
    Eigen::MatrixXd P(Eigen::Index(basis.size()), Eigen::Index(v.size()));
    for (std::size_t n = 0; n < v.size(); ++n)
        basis.values(v[n], i[n], P.col(Eigen::Index(n)).data());
    return P;
}

double kernel_tolerance(const OperatorMatrix& L)
{
    const double top = L.eigenvalues.size() ? std::abs(L.eigenvalues.maxCoeff()) : 0.0;
    return 1e-8 * std::max(1.0, top);
}

/**
 * Average of a matrix over the 48 signed permutations of the velocity axes.
 * L commutes with these maps, so the average has the same expectation and
 * exactly the symmetry of the continuous operator.
 */
Eigen::MatrixXd cubic_average(const SpectralBasis& basis, const Eigen::MatrixXd& A)
{
    const Eigen::Index nb = A.rows();
    std::array<int, 3> perm{0, 1, 2};
    Eigen::MatrixXd out = Eigen::MatrixXd::Zero(nb, nb);
    std::vector<int> target(static_cast<std::size_t>(nb));
    Eigen::VectorXd sign(nb);
    int count = 0;
    do {
        for (int flips = 0; flips < 8; ++flips) {
            for (Eigen::Index k = 0; k < nb; ++k) {
                const auto& e = basis.index[std::size_t(k)];
                int parity = 0;
                for (int d = 0; d < 3; ++d)
                    if (flips & (1 << d))
                        parity += e[std::size_t(d)];
                sign[k] = (parity % 2) ? -1.0 : 1.0;
                target[std::size_t(k)] = basis.find(e[std::size_t(perm[0])], e[std::size_t(perm[1])],
                                                    e[std::size_t(perm[2])], e[3]);
            }
            for (Eigen::Index j = 0; j < nb; ++j)
                for (Eigen::Index i = 0; i < nb; ++i)
                    out(target[std::size_t(i)], target[std::size_t(j)]) += sign[i] * sign[j] * A(i, j);
            ++count;
        }
    } while (std::next_permutation(perm.begin(), perm.end()));
    return out / double(count);
}

} // namespace

// ---------------------------------------------------------------- basis

int SpectralBasis::find(int a, int b, int c, int j) const
{
    if (a < 0 || b < 0 || c < 0 || j < 0 || a > n_v || b > n_v || c > n_v || j > n_i)
        return -1;
    return lookup[std::size_t(((a * (n_v + 1) + b) * (n_v + 1) + c) * (n_i + 1) + j)];
}

void SpectralBasis::values(const Eigen::Vector3d& v, double i, double* out) const
{
    double h[3][32];
    double l[32];
    for (int d = 0; d < 3; ++d)
        hermite_values(n_v, v[d], h[d]);
    laguerre_values(n_i, params.laguerre_a(), i, l);
    for (std::size_t k = 0; k < index.size(); ++k) {
        const auto& e = index[k];
        out[k] = h[0][e[0]] * h[1][e[1]] * h[2][e[2]] * l[e[3]];
    }
}

Eigen::VectorXd SpectralBasis::project(const std::function<double(const Eigen::Vector3d&, double)>& g) const
{
    const MaxwellRule r = maxwell_rule(n_v + 4, n_i + 4, params);
    Eigen::VectorXd out = Eigen::VectorXd::Zero(Eigen::Index(size()));
    Eigen::VectorXd p(static_cast<Eigen::Index>(size()));
    for (std::size_t n = 0; n < r.w.size(); ++n) {
        values(r.v[n], r.i[n], p.data());
        out += r.w[n] * g(r.v[n], r.i[n]) * p;
    }
    return out;
}

Eigen::MatrixXd SpectralBasis::gram() const
{
    const MaxwellRule r = maxwell_rule(n_v + 1, n_i + 1, params);
    Eigen::MatrixXd P = values_matrix(*this, r.v, r.i);
    const Eigen::Map<const Eigen::VectorXd> w(r.w.data(), Eigen::Index(r.w.size()));
    return P * w.asDiagonal() * P.transpose();
}

SpectralBasis build_basis(int n_v, int n_i, const ModelParams& params)
{
    params.validate();
    if (n_v < 2 || n_i < 1)
        throw UsageError("build_basis: need n_v >= 2 and n_i >= 1 to contain the conserved quantities");
    if (n_v > 30 || n_i > 30)
        throw CapacityError("build_basis: degree above 30");
    SpectralBasis b;
    b.n_v = n_v;
    b.n_i = n_i;
    b.params = params;
    b.lookup.assign(std::size_t((n_v + 1) * (n_v + 1) * (n_v + 1) * (n_i + 1)), -1);
    for (int total = 0; total <= n_v; ++total)
        for (int a = total; a >= 0; --a)
            for (int bb = total - a; bb >= 0; --bb) {
                const int c = total - a - bb;
                for (int j = 0; j <= n_i; ++j) {
                    b.lookup[std::size_t(((a * (n_v + 1) + bb) * (n_v + 1) + c) * (n_i + 1) + j)] =
                        int(b.index.size());
                    b.index.push_back({a, bb, c, j});
                }
            }
    if (b.index.size() > 4000)
        throw CapacityError("build_basis: more than 4000 basis functions");
    return b;
}

// ---------------------------------------------------------------- L assembly

OperatorMatrix assemble_L(const SpectralBasis& basis, const QuadratureSpec& quad)
{
    quad.validate();
    const ModelParams& params = basis.params;
    const Eigen::Index nb = Eigen::Index(basis.size());

    // Given (V, Phi) the integrand is polynomial, so those are integrated by
    // Gauss rules and only the bounded variables are sampled.
    const int n_hermite = basis.n_v + 1;
    const int n_phi = (basis.n_v + 2 * basis.n_i + 1) / 2 + 2;
    const std::size_t node_count = stratified_node_count(n_hermite, n_phi);

    constexpr int kReplicas = 8;
    const std::int64_t per_node_rep = std::max<std::int64_t>(
        1, quad.l_samples / (kReplicas * std::int64_t(node_count)));
    std::vector<Eigen::MatrixXd> reps(kReplicas, Eigen::MatrixXd::Zero(nb, nb));
    Eigen::MatrixXd D(nb, kSampleBlock);
    Eigen::Index fill = 0;
    Eigen::VectorXd p0(nb), p1(nb), p2(nb), p3(nb);

    for (int rep = 0; rep < kReplicas; ++rep) {
        auto flush = [&]() {
            if (fill == 0)
                return;
            reps[std::size_t(rep)].selfadjointView<Eigen::Lower>().rankUpdate(D.leftCols(fill));
            fill = 0;
        };
        const auto rule =
            stratified_collision_rule(params, n_hermite, n_phi, per_node_rep, quad.seed, kTagWeakForm, rep, kReplicas);
        for (const WeightedMeasureSample& ws : rule) {
            const MeasureSample& m = ws.s;
            basis.values(m.v, m.i, p0.data());
            basis.values(m.vs, m.is, p1.data());
            basis.values(m.vp, m.ip, p2.data());
            basis.values(m.vsp, m.isp, p3.data());
            D.col(fill++) = std::sqrt(0.25 * ws.weight) * (p2 + p3 - p0 - p1);
            if (fill == kSampleBlock)
                flush();
        }
        flush();
    }

    OperatorMatrix L;
    L.basis = basis;
    L.kind = OperatorKind::L;
    L.samples = per_node_rep * kReplicas * std::int64_t(node_count);
    Eigen::MatrixXd mean = Eigen::MatrixXd::Zero(nb, nb);
    std::vector<Eigen::MatrixXd> full(kReplicas);
    for (int r = 0; r < kReplicas; ++r) {
        full[std::size_t(r)] = cubic_average(basis, reps[std::size_t(r)].selfadjointView<Eigen::Lower>());
        mean += full[std::size_t(r)];
    }
    mean /= double(kReplicas);
    Eigen::MatrixXd var = Eigen::MatrixXd::Zero(nb, nb);
    for (const auto& m : full)
        var += (m - mean).cwiseAbs2();
    var /= double(kReplicas - 1);
    L.entries = mean;
    L.std_error = (var / double(kReplicas)).cwiseSqrt();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(L.entries, Eigen::EigenvaluesOnly);
    L.eigenvalues = es.eigenvalues();
    return L;
}

LCrossCheck cross_validate_L(const OperatorMatrix& L, int block, const QuadratureSpec& quad)
{
    if (L.kind != OperatorKind::L)
        throw UsageError("cross_validate_L: operator is not L");
    const SpectralBasis& basis = L.basis;
    const ModelParams& params = basis.params;
    const int m = std::clamp(block, 1, int(basis.size()));
    const double kappa = collision_kappa(params);

    // nu and K1 parts on a tensor Gauss grid
    const MaxwellRule r = maxwell_rule(basis.n_v + 4, basis.n_i + 4, params);
    const std::size_t ng = r.w.size();
    const Eigen::MatrixXd P = values_matrix(basis, r.v, r.i).topRows(m);
    Eigen::MatrixXd B = assemble_nu(basis, quad).topLeftCorner(m, m);

    Eigen::MatrixXd k1w(static_cast<Eigen::Index>(ng), static_cast<Eigen::Index>(ng));
    for (std::size_t a = 0; a < ng; ++a)
        for (std::size_t b = 0; b <= a; ++b) {
            const KernelPoint kp{{r.v[a], r.i[a]}, {r.v[b], r.i[b]}};
            const double root = std::sqrt(maxwellian({r.v[a], r.i[a]}, params) * maxwellian({r.v[b], r.i[b]}, params));
            const double val = r.w[a] * r.w[b] * k1(kp, params, quad) / root;
            k1w(Eigen::Index(a), Eigen::Index(b)) = val;
            k1w(Eigen::Index(b), Eigen::Index(a)) = val;
        }
    B += P * k1w * P.transpose();

    // K2 part: E[rate (p_i + p_i*)/2 (p_j' + p_j'*)], independent stream
    Eigen::MatrixXd gsum = Eigen::MatrixXd::Zero(m, m);
    Eigen::MatrixXd gsq = Eigen::MatrixXd::Zero(m, m);
    const Eigen::Index nb = Eigen::Index(basis.size());
    Eigen::MatrixXd U(m, kSampleBlock), V(m, kSampleBlock);
    Eigen::VectorXd p0(nb), p1(nb), p2(nb), p3(nb);
    const std::int64_t n = quad.l_samples;
    for_each_block(n, quad.seed + 1, kTagGain, [&](RandomStream& rng, std::int64_t begin, std::int64_t end) {
        const Eigen::Index cnt = Eigen::Index(end - begin);
        for (Eigen::Index s = 0; s < cnt; ++s) {
            const MeasureSample ms = sample_collision_measure(rng, params, kappa);
            basis.values(ms.v, ms.i, p0.data());
            basis.values(ms.vs, ms.is, p1.data());
            basis.values(ms.vp, ms.ip, p2.data());
            basis.values(ms.vsp, ms.isp, p3.data());
            U.col(s) = 0.5 * ms.rate * (p0.head(m) + p1.head(m));
            V.col(s) = p2.head(m) + p3.head(m);
        }
        gsum.noalias() += U.leftCols(cnt) * V.leftCols(cnt).transpose();
        gsq.noalias() += U.leftCols(cnt).cwiseAbs2() * V.leftCols(cnt).cwiseAbs2().transpose();
    });
    const double nn = double(n);
    const Eigen::MatrixXd gain = gsum / nn;
    const Eigen::MatrixXd gain_se = ((gsq / nn - gain.cwiseAbs2()).cwiseMax(0.0) / (nn - 1.0)).cwiseSqrt();
    B -= gain;

    LCrossCheck out;
    out.block = m;
    out.route_a = L.entries.topLeftCorner(m, m);
    out.route_b = B;
    out.scale = out.route_a.cwiseAbs().maxCoeff();
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < m; ++j) {
            const double diff = std::abs(out.route_a(i, j) - B(i, j));
            const double se = std::hypot(L.std_error(i, j), gain_se(i, j));
            out.max_abs_diff = std::max(out.max_abs_diff, diff);
            if (se > 0.0)
                out.max_z = std::max(out.max_z, diff / se);
        }
    return out;
}

Eigen::MatrixXd assemble_nu(const SpectralBasis& basis, const QuadratureSpec& quad)
{
    const MaxwellRule r = maxwell_rule(basis.n_v + 4, basis.n_i + 4, basis.params);
    const Eigen::MatrixXd P = values_matrix(basis, r.v, r.i);
    Eigen::VectorXd nu_w(static_cast<Eigen::Index>(r.w.size()));
    for (std::size_t a = 0; a < r.w.size(); ++a)
        nu_w[Eigen::Index(a)] = r.w[a] * nu({r.v[a], r.i[a]}, basis.params, quad);
    return P * nu_w.asDiagonal() * P.transpose();
}

double k_operator_norm(const OperatorMatrix& L, const QuadratureSpec& quad)
{
    if (L.kind != OperatorKind::L)
        throw UsageError("k_operator_norm: operator is not L");
    const Eigen::MatrixXd K = assemble_nu(L.basis, quad) - L.entries;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (K + K.transpose()), Eigen::EigenvaluesOnly);
    return es.eigenvalues().cwiseAbs().maxCoeff();
}

int kernel_dimension(const OperatorMatrix& L)
{
    if (L.kind != OperatorKind::L)
        throw UsageError("kernel_dimension: operator is not L");
    const double tol = kernel_tolerance(L);
    int count = 0;
    for (Eigen::Index k = 0; k < L.eigenvalues.size(); ++k)
        if (L.eigenvalues[k] < tol)
            ++count;
    return count;
}

double coercivity_gap(const OperatorMatrix& L)
{
    const int dim = kernel_dimension(L);
    if (dim != 5)
        throw ModelError("coercivity_gap: kernel dimension is " + std::to_string(dim) + ", expected 5");
    if (L.eigenvalues.size() <= 5)
        throw ModelError("coercivity_gap: basis has no complement of the kernel");
    return L.eigenvalues[5];
}

// ---------------------------------------------------------------- projections

std::array<Eigen::VectorXd, 5> kernel_vectors(const SpectralBasis& basis)
{
    const Eigen::Index nb = Eigen::Index(basis.size());
    std::array<Eigen::VectorXd, 5> out;
    for (auto& x : out)
        x = Eigen::VectorXd::Zero(nb);
    out[0][basis.find(0, 0, 0, 0)] = 1.0;
    out[1][basis.find(1, 0, 0, 0)] = 1.0;
    out[2][basis.find(0, 1, 0, 0)] = 1.0;
    out[3][basis.find(0, 0, 1, 0)] = 1.0;
    const double r2 = std::sqrt(2.0);
    out[4][basis.find(2, 0, 0, 0)] = r2;
    out[4][basis.find(0, 2, 0, 0)] = r2;
    out[4][basis.find(0, 0, 2, 0)] = r2;
    out[4][basis.find(0, 0, 0, 1)] = -2.0 * std::sqrt(0.5 * basis.params.delta);
    return out;
}

MacroCoefficients macro_extract(const Eigen::VectorXcd& f, const SpectralBasis& basis)
{
    if (f.size() != Eigen::Index(basis.size()))
        throw UsageError("macro_extract: coefficient vector does not match the basis");
    const auto kv = kernel_vectors(basis);
    MacroCoefficients m;
    m.a = f[basis.find(0, 0, 0, 0)];
    m.b = {f[basis.find(1, 0, 0, 0)], f[basis.find(0, 1, 0, 0)], f[basis.find(0, 0, 1, 0)]};
    m.c = kv[4].cast<Cd>().dot(f) / (6.0 + 2.0 * basis.params.delta);
    return m;
}

Eigen::VectorXcd macro_project(const Eigen::VectorXcd& f, const SpectralBasis& basis)
{
    const MacroCoefficients m = macro_extract(f, basis);
    const auto kv = kernel_vectors(basis);
    Eigen::VectorXcd out = m.a * kv[0].cast<Cd>() + m.c * kv[4].cast<Cd>();
    for (int d = 0; d < 3; ++d)
        out += m.b[d] * kv[std::size_t(d + 1)].cast<Cd>();
    return out;
}

// ---------------------------------------------------------------- mode generator

OperatorMatrix velocity_matrix(const SpectralBasis& basis, int axis)
{
    if (axis < 0 || axis > 2)
        throw UsageError("velocity_matrix: axis must be 0, 1 or 2");
    const Eigen::Index nb = Eigen::Index(basis.size());
    OperatorMatrix A;
    A.basis = basis;
    A.kind = OperatorKind::VelocityMultiplication;
    A.entries = Eigen::MatrixXd::Zero(nb, nb);
    for (Eigen::Index col = 0; col < nb; ++col) {
        auto e = basis.index[std::size_t(col)];
        const int deg = e[std::size_t(axis)];
        e[std::size_t(axis)] = deg + 1;
        const int up = basis.find(e[0], e[1], e[2], e[3]);
        if (up >= 0)
            A.entries(up, col) = std::sqrt(double(deg + 1));
        e[std::size_t(axis)] = deg - 1;
        const int down = basis.find(e[0], e[1], e[2], e[3]);
        if (down >= 0)
            A.entries(down, col) = std::sqrt(double(deg));
    }
    return A;
}

OperatorMatrix mode_generator(const Eigen::Vector3i& k, const SpectralBasis& basis, const OperatorMatrix& L,
                              const QuadratureSpec&)
{
    if (L.kind != OperatorKind::L)
        throw UsageError("mode_generator: operator is not L");
    require_same_basis(L.basis, basis, "mode_generator");
    OperatorMatrix G;
    G.basis = basis;
    G.kind = OperatorKind::ModeGenerator;
    G.k = k;
    Eigen::MatrixXd kv = Eigen::MatrixXd::Zero(L.entries.rows(), L.entries.cols());
    for (int d = 0; d < 3; ++d)
        if (k[d] != 0)
            kv += double(k[d]) * velocity_matrix(basis, d).entries;
    G.complex_entries = -(Cd(0.0, 1.0) * kv.cast<Cd>() + L.entries.cast<Cd>());
    return G;
}

Eigen::VectorXcd generator_spectrum(const OperatorMatrix& G)
{
    if (G.kind == OperatorKind::ModeGenerator) {
        Eigen::ComplexEigenSolver<Eigen::MatrixXcd> es(G.complex_entries, false);
        return es.eigenvalues();
    }
    if (G.kind == OperatorKind::L)
        return (-G.eigenvalues).cast<Cd>();
    throw UsageError("generator_spectrum: operator is not a generator");
}

double spectral_abscissa(const OperatorMatrix& G)
{
    return generator_spectrum(G).real().maxCoeff();
}

// ---------------------------------------------------------------- compensator

Eigen::MatrixXcd compensator_matrix(const Eigen::Vector3i& k, const SpectralBasis& basis)
{
    const Eigen::Index nb = Eigen::Index(basis.size());
    const double delta = basis.params.delta;
    const auto kv = kernel_vectors(basis);
    const Eigen::VectorXd a_row = kv[0];
    const Eigen::VectorXd c_row = kv[4] / (6.0 + 2.0 * delta);
    std::array<Eigen::VectorXd, 3> b_row{kv[1], kv[2], kv[3]};

    // P2 = I - P1 as a real matrix; P1 = sum of normalized kernel projectors
    Eigen::MatrixXd P2 = Eigen::MatrixXd::Identity(nb, nb);
    for (const auto& x : kv)
        P2 -= x * x.transpose() / x.squaredNorm();

    const Cd I(0.0, 1.0);
    Eigen::MatrixXcd B = Eigen::MatrixXcd::Zero(nb, nb);
    // f^H (w u^T) f = (u^T f) conj(w^T f) for real w
    auto add = [&](const Eigen::VectorXcd& u, const Eigen::VectorXd& w) { B += w.cast<Cd>() * u.transpose(); };

    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) {
            if (k[i] == 0 && k[j] == 0)
                continue;
            const Eigen::VectorXd pij = basis.project([i, j](const Eigen::Vector3d& v, double) { return v[i] * v[j] - 1.0; });
            Eigen::VectorXd w = P2.transpose() * pij;
            if (i == j)
                w += 2.0 * c_row;
            const Eigen::VectorXcd u = I * (double(k[i]) * b_row[std::size_t(j)] + double(k[j]) * b_row[std::size_t(i)]).cast<Cd>();
            add(u, w);
        }
    for (int i = 0; i < 3; ++i) {
        if (k[i] == 0)
            continue;
        add(I * double(k[i]) * a_row.cast<Cd>(), b_row[std::size_t(i)]);
        const Eigen::VectorXd pi = basis.project([i, delta](const Eigen::Vector3d& v, double e) {
            return (v.squaredNorm() + 2.0 * e - 5.0 - delta) * v[i];
        });
        add(I * double(k[i]) * c_row.cast<Cd>(), P2.transpose() * pi);
    }
    return B;
}

double compensator_functional(const Eigen::VectorXcd& fhat, const Eigen::Vector3i& k, const SpectralBasis& basis)
{
    if (fhat.size() != Eigen::Index(basis.size()))
        throw UsageError("compensator_functional: coefficient vector does not match the basis");
    const Eigen::MatrixXcd B = compensator_matrix(k, basis);
    return fhat.dot(B * fhat).real();
}

double lyapunov_functional(const Eigen::VectorXcd& fhat, const Eigen::Vector3i& k, const SpectralBasis& basis,
                           double eps)
{
    return fhat.squaredNorm() + eps * compensator_functional(fhat, k, basis);
}

LyapunovWeight choose_compensator_weight(const OperatorMatrix& G)
{
    if (G.kind != OperatorKind::ModeGenerator)
        throw UsageError("choose_compensator_weight: operator is not a mode generator");
    const Eigen::MatrixXcd B = compensator_matrix(G.k, G.basis);
    const Eigen::MatrixXcd S = 0.5 * (B + B.adjoint());
    const Eigen::Index nb = S.rows();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(S, Eigen::EigenvaluesOnly);
    const double s_lo = es.eigenvalues().minCoeff();
    const double s_hi = es.eigenvalues().maxCoeff();
    const double s_max = std::max(std::abs(s_lo), std::abs(s_hi));
    const double tol = 1e-10 * std::max(1.0, G.complex_entries.cwiseAbs().maxCoeff());

    auto dissipation = [&](double eps) {
        const Eigen::MatrixXcd W = Eigen::MatrixXcd::Identity(nb, nb) + eps * S;
        const Eigen::MatrixXcd H = W * G.complex_entries + G.complex_entries.adjoint() * W;
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> hs(0.5 * (H + H.adjoint()), Eigen::EigenvaluesOnly);
        return hs.eigenvalues().maxCoeff();
    };

    LyapunovWeight out;
    double eps = s_max > 0.0 ? 0.5 / s_max : 0.0;
    for (int it = 0; it < 40; ++it) {
        const double d = dissipation(eps);
        out.eps = eps;
        out.dissipation = d;
        if (d <= tol) {
            out.dissipative = true;
            break;
        }
        if (eps == 0.0)
            break;
        eps *= 0.5;
    }
    out.c1 = 1.0 + out.eps * s_lo;
    out.c2 = 1.0 + out.eps * s_hi;
    return out;
}

} // namespace polykin

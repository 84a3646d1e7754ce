#include "polykin/cli.hpp"

#include "polykin/collision.hpp"
#include "polykin/errors.hpp"
#include "polykin/frequency_kernel.hpp"
#include "polykin/grid.hpp"
#include "polykin/linearized.hpp"
#include "polykin/rng.hpp"
#include "polykin/solver.hpp"

#include <fmt/format.h>
#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>

namespace polykin::cli {

namespace {

using json = nlohmann::ordered_json;
using Cd = std::complex<double>;

constexpr std::uint64_t kTagCoercivity = 0x91;
constexpr std::uint64_t kTagGammaFunctions = 0x92;
constexpr std::uint64_t kTagLinearData = 0x93;

std::string num(double x) { return format_number(x); }
std::string num(int x) { return std::to_string(x); }
std::string num(std::size_t x) { return std::to_string(x); }

/// One thresholded measurement.
struct Check {
    std::string name;
    double measured = 0.0;
    std::string relation;
    double threshold = 0.0;
    bool pass = false;
};

Check make_check(std::string name, double measured, const std::string& relation, double threshold)
{
    bool ok = false;
    if (relation == "<=")
        ok = measured <= threshold;
    else if (relation == "<")
        ok = measured < threshold;
    else if (relation == ">=")
        ok = measured >= threshold;
    else if (relation == ">")
        ok = measured > threshold;
    else if (relation == "==")
        ok = measured == threshold;
    else if (relation == "finite")
        ok = std::isfinite(measured);
    else
        throw UsageError("unknown relation " + relation);
    return {std::move(name), measured, relation, threshold, ok};
}

json to_json(const Check& c)
{
    json j;
    j["name"] = c.name;
    j["status"] = c.pass ? "PASS" : "FAIL";
    j["measured"] = c.measured;
    j["relation"] = c.relation;
    if (c.relation != "finite")
        j["threshold"] = c.threshold;
    return j;
}

bool all_pass(const std::vector<Check>& checks)
{
    return std::all_of(checks.begin(), checks.end(), [](const Check& c) { return c.pass; });
}

json checks_json(const std::vector<Check>& checks)
{
    json arr = json::array();
    for (const Check& c : checks)
        arr.push_back(to_json(c));
    return arr;
}

/// Report files of one run. Every file is written atomically.
class Reporter {
public:
    Reporter(const RunConfig& cfg, std::ostream& log) : dir_(cfg.out_dir), plots_(cfg.emit_plot_data), log_(log)
    {
        std::filesystem::create_directories(dir_);
    }

    void csv(const std::string& name, const CsvTable& table) { write(name, table.str()); }
    void json_file(const std::string& name, const json& j) { write(name, j.dump(2) + "\n"); }
    void plot(const std::string& name, const std::vector<double>& x, const std::vector<double>& y)
    {
        if (plots_)
            write("plot_" + name + ".dat", plot_series(x, y));
    }

private:
    void write(const std::string& name, const std::string& content)
    {
        const auto path = dir_ / name;
        write_atomic(path.string(), content);
        log_ << "  wrote " << path.string() << "\n";
    }

    std::filesystem::path dir_;
    bool plots_;
    std::ostream& log_;
};

void log_checks(std::ostream& log, const std::string& group, const std::vector<Check>& checks)
{
    for (const Check& c : checks)
        log << fmt::format("  {:<4} {}.{}: {} {} {}\n", c.pass ? "PASS" : "FAIL", group, c.name, num(c.measured),
                           c.relation, c.relation == "finite" ? "" : num(c.threshold));
}

json run_header(Suite s, const RunConfig& cfg)
{
    json j;
    j["suite"] = suite_name(s);
    j["seed"] = cfg.seed;
    j["model"] = {{"delta", cfg.model.delta}, {"alpha", cfg.model.alpha}, {"c_sigma", cfg.model.c_sigma},
                  {"beta", cfg.model.beta}};
    j["basis"] = {{"n_v", cfg.basis.n_v}, {"n_i", cfg.basis.n_i}};
    return j;
}

QuadratureSpec seeded(const RunConfig& cfg)
{
    QuadratureSpec q = cfg.quad;
    q.seed = cfg.seed;
    return q;
}

std::vector<double> linspace(double a, double b, int n)
{
    std::vector<double> out(static_cast<std::size_t>(n));
    for (int k = 0; k < n; ++k)
        out[static_cast<std::size_t>(k)] = a + (b - a) * k / (n - 1);
    return out;
}

std::vector<double> geomspace(double a, double b, int n)
{
    std::vector<double> out = linspace(std::log(a), std::log(b), n);
    for (double& x : out)
        x = std::exp(x);
    return out;
}

double relative_change(double a, double b) { return std::abs(b - a) / std::abs(a); }

// ---------------------------------------------------------------- verify

json verify_entry(const std::string& lemma, const std::vector<Check>& checks, double measured_constant,
                  double tolerance)
{
    json j;
    j["lemma"] = lemma;
    j["status"] = all_pass(checks) ? "PASS" : "FAIL";
    j["measured_constant"] = measured_constant;
    j["tolerance"] = tolerance;
    j["checks"] = checks_json(checks);
    return j;
}

/// nu (1 + |v| + sqrt(I))^{alpha - 2} over the sweep, with doubled quadrature nodes.
json verify_collision_frequency(const RunConfig& cfg, Reporter& rep, std::ostream& log)
{
    const VerifyConfig& V = cfg.verify;
    const QuadratureSpec q = seeded(cfg);
    QuadratureSpec q2 = q;
    q2.nu_radial *= 2;
    q2.nu_polar *= 2;
    q2.nu_internal *= 2;
    const auto speeds = linspace(0.0, V.v_max, V.v_points);
    const auto energies = geomspace(V.i_min, V.i_max, V.i_points);

    CsvTable table({"alpha", "speed", "energy", "nu", "ratio", "nu_refined", "ratio_refined"});
    double sup0 = 0.0, inf0 = INFINITY, sup1 = 0.0, inf1 = INFINITY;
    double nu2_min = INFINITY, nu2_max = 0.0;
    std::vector<double> plot_x, plot_y;
    ModelParams p2 = cfg.model;
    p2.alpha = 2.0;
    for (const ModelParams* P : {static_cast<const ModelParams*>(&cfg.model), static_cast<const ModelParams*>(&p2)}) {
        const bool main = P == &cfg.model;
        for (double s : speeds)
            for (double i : energies) {
                const PhasePoint x{Eigen::Vector3d(s, 0.0, 0.0), i};
                const double scale = std::pow(1.0 + s + std::sqrt(i), P->alpha - 2.0);
                const double n0 = nu(x, *P, q);
                const double n1 = nu(x, *P, q2);
                table.row({num(P->alpha), num(s), num(i), num(n0), num(n0 * scale), num(n1), num(n1 * scale)});
                if (main) {
                    sup0 = std::max(sup0, n0 * scale);
                    inf0 = std::min(inf0, n0 * scale);
                    sup1 = std::max(sup1, n1 * scale);
                    inf1 = std::min(inf1, n1 * scale);
                    if (i == energies.front()) {
                        plot_x.push_back(s);
                        plot_y.push_back(n0 * scale);
                    }
                } else {
                    nu2_min = std::min(nu2_min, n0);
                    nu2_max = std::max(nu2_max, n0);
                }
            }
    }
    rep.csv("lemma_2_1.csv", table);
    rep.plot("lemma_2_1_ratio_vs_speed", plot_x, plot_y);

    const double drift = std::max(relative_change(sup0, sup1), relative_change(inf0, inf1));
    const double spread = (nu2_max - nu2_min) / (0.5 * (nu2_max + nu2_min));
    std::vector<Check> checks = {
        make_check("sup_ratio", sup0, "finite", 0.0),
        make_check("inf_ratio", inf0, ">", 0.0),
        make_check("refinement_drift", drift, "<=", V.nu_refine_tol),
        make_check("alpha2_relative_spread", spread, "<=", V.nu_alpha2_spread),
    };
    log_checks(log, "lemma_2_1", checks);
    json j = verify_entry("lemma_2_1", checks, sup0, V.nu_refine_tol);
    j["lower_constant"] = inf0;
    return j;
}

/// (1 + |v| + I^{1/8}) kw over the sweep and the large-I slope at v = 0.
json verify_weighted_kernel(const RunConfig& cfg, Reporter& rep, std::ostream& log)
{
    const VerifyConfig& V = cfg.verify;
    QuadratureSpec q = seeded(cfg);
    q.kernel_samples = V.kw_samples;
    QuadratureSpec q2 = q;
    q2.kernel_samples = 2 * V.kw_samples;
    const auto speeds = linspace(0.0, V.v_max, V.v_points);
    const auto energies = geomspace(V.i_min, V.i_max, V.i_points);

    CsvTable table({"speed", "energy", "kw", "kw_error", "scaled", "scaled_refined"});
    double sup0 = 0.0, sup1 = 0.0;
    for (double s : speeds)
        for (double i : energies) {
            const PhasePoint x{Eigen::Vector3d(s, 0.0, 0.0), i};
            const double factor = 1.0 + s + std::pow(i, 0.125);
            const KernelEstimate e0 = kw_weighted_integral(x, V.kw_eps, V.kw_m, cfg.model, q);
            const KernelEstimate e1 = kw_weighted_integral(x, V.kw_eps, V.kw_m, cfg.model, q2);
            table.row({num(s), num(i), num(e0.value), num(e0.error), num(factor * e0.value), num(factor * e1.value)});
            sup0 = std::max(sup0, factor * e0.value);
            sup1 = std::max(sup1, factor * e1.value);
        }
    rep.csv("lemma_2_2.csv", table);

    CsvTable slope_table({"energy", "kw", "kw_error"});
    std::vector<double> li, lk, plot_i, plot_k;
    for (double i : geomspace(V.kw_slope_i_min, 10.0 * V.kw_slope_i_min, V.kw_slope_points)) {
        const KernelEstimate e = kw_weighted_integral({Eigen::Vector3d::Zero(), i}, V.kw_eps, V.kw_m, cfg.model, q2);
        slope_table.row({num(i), num(e.value), num(e.error)});
        plot_i.push_back(i);
        plot_k.push_back(e.value);
        li.push_back(std::log(i));
        lk.push_back(std::log(e.value));
    }
    rep.csv("lemma_2_2_slope.csv", slope_table);
    rep.plot("lemma_2_2_kw_vs_energy", plot_i, plot_k);
    const double slope = fit_slope(li, lk);

    std::vector<Check> checks = {
        make_check("sup_scaled", sup0, "finite", 0.0),
        make_check("refinement_drift", relative_change(sup0, sup1), "<=", V.kw_refine_tol),
        make_check("large_energy_slope", slope, "<=", V.kw_slope_max),
    };
    log_checks(log, "lemma_2_2", checks);
    return verify_entry("lemma_2_2", checks, sup0, V.kw_refine_tol);
}

/// |w Gamma(f, f)| / (nu |w f|_inf^2) for random bounded f.
json verify_gamma_bound(const RunConfig& cfg, Reporter& rep, std::ostream& log)
{
    const VerifyConfig& V = cfg.verify;
    const ModelParams& P = cfg.model;
    QuadratureSpec q = seeded(cfg);
    q.mc_samples = V.gamma_samples;
    QuadratureSpec q2 = q;
    q2.mc_samples = 2 * V.gamma_samples;
    const PhasePoint points[] = {{Eigen::Vector3d(0.0, 0.0, 0.0), 1.0},
                                 {Eigen::Vector3d(2.0, 0.0, 0.0), 2.0},
                                 {Eigen::Vector3d(0.0, 3.0, 1.0), 0.5},
                                 {Eigen::Vector3d(5.0, 0.0, 0.0), 8.0}};
    double nu_at[4];
    for (int k = 0; k < 4; ++k)
        nu_at[k] = nu(points[k], P, q);

    CsvTable table({"function", "point", "speed", "energy", "gamma", "gamma_error", "nu", "ratio", "ratio_refined"});
    double sup0 = 0.0, sup1 = 0.0;
    for (int fn = 0; fn < V.gamma_functions; ++fn) {
        // w f = cos(k.v + phase) cos(b I): sup |w f| = 1
        RandomStream rng(block_seed(cfg.seed, kTagGammaFunctions, static_cast<std::uint64_t>(fn)));
        const Eigen::Vector3d kv(2.0 * rng.uniform() - 1.0, 2.0 * rng.uniform() - 1.0, 2.0 * rng.uniform() - 1.0);
        const double phase = 2.0 * M_PI * rng.uniform();
        const double b = rng.uniform();
        const double beta = P.beta;
        const PhaseFunction f = [=](const Eigen::Vector3d& v, double i) {
            return std::cos(kv.dot(v) + phase) * std::cos(b * i) / weight(v, i, beta);
        };
        for (int k = 0; k < 4; ++k) {
            const PhasePoint& x = points[k];
            const double w = weight(x, P);
            const CollisionEstimate g0 = gamma_apply(f, f, x, P, q);
            const CollisionEstimate g1 = gamma_apply(f, f, x, P, q2);
            const double r0 = w * std::abs(g0.value) / nu_at[k];
            const double r1 = w * std::abs(g1.value) / nu_at[k];
            table.row({num(fn), num(k), num(x.v.norm()), num(x.i), num(g0.value), num(g0.std_error), num(nu_at[k]),
                       num(r0), num(r1)});
            sup0 = std::max(sup0, r0);
            sup1 = std::max(sup1, r1);
        }
    }
    rep.csv("lemma_2_3.csv", table);

    std::vector<Check> checks = {
        make_check("sup_ratio", sup0, "finite", 0.0),
        make_check("refinement_drift", relative_change(sup0, sup1), "<=", V.gamma_refine_tol),
    };
    log_checks(log, "lemma_2_3", checks);
    return verify_entry("lemma_2_3", checks, sup0, V.gamma_refine_tol);
}

double relative_asymmetry(const Eigen::MatrixXd& A)
{
    return (A - A.transpose()).cwiseAbs().maxCoeff() / A.cwiseAbs().maxCoeff();
}

std::vector<json> verify_linearized(const RunConfig& cfg, Reporter& rep, std::ostream& log)
{
    const VerifyConfig& V = cfg.verify;
    const QuadratureSpec q = seeded(cfg);
    const BasisConfig& B = cfg.basis;
    std::vector<OperatorMatrix> ops;
    for (int f : {1, B.refine}) {
        const auto t0 = std::chrono::steady_clock::now();
        ops.push_back(assemble_L(build_basis(f * B.n_v, f * B.n_i, cfg.model), q));
        log << fmt::format("  assembled L on basis {}/{} ({} functions) in {:.1f} s\n", f * B.n_v, f * B.n_i,
                           ops.back().basis.size(),
                           std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
    }
    const OperatorMatrix& L0 = ops[0];
    const OperatorMatrix& L1 = ops[1];

    // structure of L
    CsvTable eig_table({"n_v", "n_i", "index", "eigenvalue"});
    std::vector<Check> c41;
    double asym = 0.0, min_rel = INFINITY;
    int dims[2];
    for (std::size_t r = 0; r < ops.size(); ++r) {
        const OperatorMatrix& L = ops[r];
        for (Eigen::Index k = 0; k < L.eigenvalues.size(); ++k)
            eig_table.row({num(L.basis.n_v), num(L.basis.n_i), num(static_cast<int>(k)), num(L.eigenvalues[k])});
        asym = std::max(asym, relative_asymmetry(L.entries));
        min_rel = std::min(min_rel, L.eigenvalues.minCoeff() / L.eigenvalues.maxCoeff());
        dims[r] = kernel_dimension(L);
    }
    rep.csv("prop_4_1.csv", eig_table);
    c41.push_back(make_check("relative_asymmetry", asym, "<=", V.asymmetry_tol));
    c41.push_back(make_check("min_eigenvalue_relative", min_rel, ">=", -V.psd_tol));
    c41.push_back(make_check("kernel_dimension", dims[0], "==", 5));
    c41.push_back(make_check("kernel_dimension_refined", dims[1], "==", 5));
    log_checks(log, "prop_4_1", c41);
    json e41 = verify_entry("prop_4_1", c41, dims[0], V.asymmetry_tol);

    // coercivity
    const double gap0 = dims[0] == 5 ? coercivity_gap(L0) : NAN;
    const double gap1 = dims[1] == 5 ? coercivity_gap(L1) : NAN;
    CsvTable coer({"vector", "form", "bound", "relative_excess"});
    double worst = INFINITY;
    if (std::isfinite(gap0)) {
        const Eigen::MatrixXcd Lc = L0.entries.cast<Cd>();
        for (int t = 0; t < V.coercivity_vectors; ++t) {
            RandomStream rng(block_seed(cfg.seed, kTagCoercivity, static_cast<std::uint64_t>(t)));
            Eigen::VectorXcd f(static_cast<Eigen::Index>(L0.basis.size()));
            for (Eigen::Index k = 0; k < f.size(); ++k)
                f[k] = Cd(rng.normal(), rng.normal());
            const Eigen::VectorXcd p2 = f - macro_project(f, L0.basis);
            const double form = f.dot(Lc * f).real();
            const double bound = gap0 * p2.squaredNorm();
            const double excess = (form - bound) / bound;
            worst = std::min(worst, excess);
            coer.row({num(t), num(form), num(bound), num(excess)});
        }
    }
    rep.csv("prop_4_2_coercivity.csv", coer);

    // operator norm of K
    const double kn0 = k_operator_norm(L0, q);
    const double kn1 = k_operator_norm(L1, q);
    CsvTable basis_table({"n_v", "n_i", "size", "kernel_dimension", "gap", "k_norm"});
    basis_table.row({num(L0.basis.n_v), num(L0.basis.n_i), num(L0.basis.size()), num(dims[0]), num(gap0), num(kn0)});
    basis_table.row({num(L1.basis.n_v), num(L1.basis.n_i), num(L1.basis.size()), num(dims[1]), num(gap1), num(kn1)});
    rep.csv("prop_4_2.csv", basis_table);
    rep.csv("lemma_4_3.csv", basis_table);

    std::vector<Check> c42 = {
        make_check("gap", gap0, ">", 0.0),
        make_check("gap_refinement_drift", relative_change(gap0, gap1), "<=", V.gap_drift_tol),
        make_check("coercivity_min_relative_excess", worst, ">=", -V.coercivity_tol),
    };
    log_checks(log, "prop_4_2", c42);
    json e42 = verify_entry("prop_4_2", c42, gap0, V.gap_drift_tol);
    e42["gap_refined"] = gap1;

    std::vector<Check> c43 = {
        make_check("k_norm", kn0, "finite", 0.0),
        make_check("k_norm_refinement_drift", relative_change(kn0, kn1), "<=", V.k_norm_drift_tol),
    };
    log_checks(log, "lemma_4_3", c43);
    json e43 = verify_entry("lemma_4_3", c43, kn0, V.k_norm_drift_tol);
    e43["k_norm_refined"] = kn1;
    return {e41, e42, e43};
}

int verify_impl(const RunConfig& cfg, std::ostream& log)
{
    Reporter rep(cfg, log);
    json entries = json::array();
    log << "lemma_2_1: collision frequency\n";
    entries.push_back(verify_collision_frequency(cfg, rep, log));
    log << "lemma_2_2: weighted kernel integral\n";
    entries.push_back(verify_weighted_kernel(cfg, rep, log));
    log << "lemma_2_3: Gamma bound\n";
    entries.push_back(verify_gamma_bound(cfg, rep, log));
    log << "prop_4_1 / prop_4_2 / lemma_4_3: linearized operator\n";
    for (json& e : verify_linearized(cfg, rep, log))
        entries.push_back(std::move(e));

    bool pass = true;
    for (const json& e : entries)
        pass = pass && e["status"] == "PASS";
    json summary = run_header(Suite::Verify, cfg);
    summary["status"] = pass ? "PASS" : "FAIL";
    summary["entries"] = entries;
    rep.json_file("verify_summary.json", summary);
    return pass ? kExitPass : kExitFail;
}

// ---------------------------------------------------------------- spectrum

std::vector<Eigen::Vector3i> lattice_ball(int k_max)
{
    std::vector<Eigen::Vector3i> out;
    for (int a = -k_max; a <= k_max; ++a)
        for (int b = -k_max; b <= k_max; ++b)
            for (int c = -k_max; c <= k_max; ++c)
                if (a * a + b * b + c * c <= k_max * k_max)
                    out.emplace_back(a, b, c);
    std::stable_sort(out.begin(), out.end(),
                     [](const Eigen::Vector3i& x, const Eigen::Vector3i& y) { return x.squaredNorm() < y.squaredNorm(); });
    return out;
}

int spectrum_impl(const RunConfig& cfg, std::ostream& log)
{
    Reporter rep(cfg, log);
    const QuadratureSpec q = seeded(cfg);
    const SpectralBasis basis = build_basis(cfg.basis.n_v, cfg.basis.n_i, cfg.model);
    const OperatorMatrix L = assemble_L(basis, q);
    log << fmt::format("  assembled L on basis {}/{} ({} functions)\n", basis.n_v, basis.n_i, basis.size());

    CsvTable eig_table({"k1", "k2", "k3", "k_norm", "index", "re", "im"});
    CsvTable gap_table({"k1", "k2", "k3", "k_norm", "gap", "near_zero"});
    int near_zero_k0 = -1;
    double min_gap = INFINITY;
    std::vector<double> px, py;
    for (const Eigen::Vector3i& k : lattice_ball(cfg.spectrum.k_max)) {
        const OperatorMatrix G = mode_generator(k, basis, L, q);
        Eigen::VectorXcd ev = generator_spectrum(G);
        std::vector<Cd> sorted(ev.data(), ev.data() + ev.size());
        std::sort(sorted.begin(), sorted.end(), [](const Cd& a, const Cd& b) {
            return a.real() != b.real() ? a.real() > b.real() : a.imag() > b.imag();
        });
        double scale = 0.0;
        for (const Cd& z : sorted)
            scale = std::max(scale, std::abs(z));
        int near_zero = 0;
        for (const Cd& z : sorted)
            near_zero += std::abs(z) <= cfg.spectrum.near_zero_tol * scale ? 1 : 0;
        const double kn = std::sqrt(static_cast<double>(k.squaredNorm()));
        for (std::size_t n = 0; n < sorted.size(); ++n)
            eig_table.row({num(k(0)), num(k(1)), num(k(2)), num(kn), num(n), num(sorted[n].real()),
                           num(sorted[n].imag())});
        double gap;
        if (k.isZero()) {
            near_zero_k0 = near_zero;
            gap = near_zero == 5 ? coercivity_gap(L) : NAN;
        } else {
            gap = -spectral_abscissa(G);
            min_gap = std::min(min_gap, gap);
        }
        gap_table.row({num(k(0)), num(k(1)), num(k(2)), num(kn), num(gap), num(near_zero)});
        px.push_back(kn);
        py.push_back(gap);
    }
    rep.csv("spectrum.csv", eig_table);
    rep.csv("spectrum_gaps.csv", gap_table);
    rep.plot("spectrum_gap_vs_k", px, py);

    std::vector<Check> checks = {make_check("near_zero_eigenvalues_k0", near_zero_k0, "==", 5)};
    if (cfg.spectrum.k_max >= 1)
        checks.push_back(make_check("min_gap_nonzero_k", min_gap, ">", 0.0));
    log_checks(log, "spectrum", checks);
    json summary = run_header(Suite::Spectrum, cfg);
    summary["status"] = all_pass(checks) ? "PASS" : "FAIL";
    summary["k_max"] = cfg.spectrum.k_max;
    summary["modes"] = gap_table.rows();
    summary["checks"] = checks_json(checks);
    rep.json_file("spectrum_summary.json", summary);
    return all_pass(checks) ? kExitPass : kExitFail;
}

// ---------------------------------------------------------------- relax

int relax_impl(const RunConfig& cfg, std::ostream& log)
{
    Reporter rep(cfg, log);
    const RelaxConfig& R = cfg.relax;
    const ModelParams& P = cfg.model;
    const QuadratureSpec q = seeded(cfg);
    const PhaseGrid grid = make_phase_grid(P, R.grid_v, R.grid_i);
    const DistributionGrid F0 = R.initial == "bimodal"
                                    ? bimodal_initial(grid, R.separation)
                                    : make_homogeneous(grid, [&](const PhasePoint& x) { return maxwellian(x, P); });
    const RelaxResult res = homogeneous_relax(F0, R.dt, R.steps, P, q);
    log << fmt::format("  {} steps of dt = {}, dt * nu_max = {}\n", R.steps, num(R.dt), num(R.dt * res.nu_max));

    CsvTable table({"step", "t", "mass_defect", "momentum_x", "momentum_y", "momentum_z", "energy_defect", "entropy",
                    "entropy_error", "distance", "noise_floor"});
    const RelaxRecord& r0 = res.records.front();
    const double momentum_scale = std::sqrt(3.0);
    const double energy_scale = 3.0 + P.delta;
    double drift = 0.0, rise = -INFINITY;
    std::vector<double> ts, hs, ds;
    for (std::size_t s = 0; s < res.records.size(); ++s) {
        const RelaxRecord& r = res.records[s];
        const DefectMoments& d = r.defects;
        table.row({num(s), num(r.t), num(d.mass), num(d.momentum(0)), num(d.momentum(1)), num(d.momentum(2)),
                   num(d.energy), num(r.entropy), num(r.entropy_error), num(r.distance), num(r.noise_floor)});
        drift = std::max({drift, std::abs(d.mass - r0.defects.mass),
                          (d.momentum - r0.defects.momentum).norm() / momentum_scale,
                          std::abs(d.energy - r0.defects.energy) / energy_scale});
        if (s > 0) {
            const double prev = res.records[s - 1].entropy;
            const double allowance = R.entropy_slack * r.entropy_error + 1e-12 * std::max(1.0, std::abs(prev));
            rise = std::max(rise, r.entropy - prev - allowance);
        }
        ts.push_back(r.t);
        hs.push_back(r.entropy);
        ds.push_back(r.distance);
    }
    rep.csv("relax_trajectory.csv", table);
    rep.plot("relax_entropy", ts, hs);
    rep.plot("relax_distance", ts, ds);

    std::vector<Check> checks = {
        make_check("invariant_drift", drift, "<=", R.conservation_tol),
        make_check("entropy_excess_rise", rise, "<=", 0.0),
    };
    log_checks(log, "relax", checks);
    json summary = run_header(Suite::Relax, cfg);
    summary["status"] = all_pass(checks) ? "PASS" : "FAIL";
    summary["initial"] = R.initial;
    summary["dt"] = R.dt;
    summary["steps"] = R.steps;
    summary["nu_max"] = res.nu_max;
    summary["entropy_maxwellian"] = entropy_maxwellian(P);
    summary["initial_distance"] = r0.distance;
    summary["final_distance"] = res.records.back().distance;
    summary["final_noise_floor"] = res.records.back().noise_floor;
    summary["checks"] = checks_json(checks);
    rep.json_file("relax_summary.json", summary);
    return all_pass(checks) ? kExitPass : kExitFail;
}

// ---------------------------------------------------------------- decay

/// Wave vectors 1 <= |k| <= k_max with k1 >= k2 >= k3 >= 0, one per orbit of the cubic group.
std::vector<Eigen::Vector3i> cubic_representatives(int k_max)
{
    std::vector<Eigen::Vector3i> out;
    for (int a = 0; a <= k_max; ++a)
        for (int b = 0; b <= a; ++b)
            for (int c = 0; c <= b; ++c) {
                const int n2 = a * a + b * b + c * c;
                if (n2 >= 1 && n2 <= k_max * k_max)
                    out.emplace_back(a, b, c);
            }
    std::stable_sort(out.begin(), out.end(),
                     [](const Eigen::Vector3i& x, const Eigen::Vector3i& y) { return x.squaredNorm() < y.squaredNorm(); });
    return out;
}

int decay_impl(const RunConfig& cfg, std::ostream& log)
{
    Reporter rep(cfg, log);
    const DecayConfig& D = cfg.decay;
    const ModelParams& P = cfg.model;
    const QuadratureSpec q = seeded(cfg);
    std::vector<Check> checks;
    json summary = run_header(Suite::Decay, cfg);

    // approximation sequence on [0, T1]
    const PhaseGrid pgrid = make_phase_grid(P, D.picard_grid_v, D.picard_grid_i);
    DistributionGrid f0 = make_homogeneous(pgrid, [&](const PhasePoint& x) {
        return std::sqrt(maxwellian(x, P)) * x.v(0) * x.v(0);
    });
    double mx = 0.0;
    for (std::size_t n = 0; n < pgrid.size(); ++n)
        mx = std::max(mx, std::abs(weight(pgrid.point(n), P) * f0.values[n]));
    for (double& x : f0.values)
        x *= D.f0_norm / mx;
    const double T1 = t1_horizon(D.f0_norm, D.c1);
    log << fmt::format("  Picard: |w f0| = {}, T1 = {}\n", num(D.f0_norm), num(T1));
    const auto reps = picard_iterate(f0, T1, D.picard_iters, P, q);
    CsvTable picard({"n", "sup_norm", "diff_norm", "ratio", "min_F"});
    json sup_series = json::array(), ratios = json::array();
    double factor = 0.0, max_ratio = 0.0;
    std::vector<double> pn, ps;
    for (const IterationReport& r : reps) {
        picard.row({num(r.n), num(r.sup_norm), num(r.diff_norm), r.has_ratio ? num(r.ratio) : "", num(r.min_F)});
        sup_series.push_back(r.sup_norm);
        if (r.has_ratio) {
            ratios.push_back(r.ratio);
            max_ratio = std::max(max_ratio, r.ratio);
        }
        if (D.f0_norm > 0.0)
            factor = std::max(factor, r.sup_norm / D.f0_norm);
        pn.push_back(r.n);
        ps.push_back(r.sup_norm);
    }
    rep.csv("decay_picard.csv", picard);
    rep.plot("decay_picard_sup_norm", pn, ps);
    checks.push_back(make_check("picard_boundedness_factor", factor, "<=", D.bound_factor));
    checks.push_back(make_check("picard_max_contraction_ratio", max_ratio, "<", D.ratio_max));
    summary["T1"] = T1;
    summary["sup_norm_series"] = sup_series;
    summary["contraction_ratios"] = ratios;
    summary["boundedness_factor"] = factor;
    summary["ratio_target_half_met"] = max_ratio <= 0.5;

    // Fourier modes of the linearized equation
    const SpectralBasis basis = build_basis(cfg.basis.n_v, cfg.basis.n_i, P);
    const OperatorMatrix L = assemble_L(basis, q);
    const double gap = coercivity_gap(L);
    std::vector<Eigen::Vector3i> modes = {Eigen::Vector3i::Zero()};
    for (const Eigen::Vector3i& k : cubic_representatives(D.linear_k_max))
        modes.push_back(k);
    CsvTable linear({"k1", "k2", "k3", "k_norm", "t_end", "fitted_rate", "reference_rate", "relative_error", "eps",
                     "lyapunov_monotone"});
    double worst_rel = 0.0, k0_ratio = 0.0;
    bool monotone = true;
    json modes_json = json::array();
    for (std::size_t m = 0; m < modes.size(); ++m) {
        const Eigen::Vector3i& k = modes[m];
        RandomStream rng(block_seed(cfg.seed, kTagLinearData, m));
        Eigen::VectorXcd fhat(static_cast<Eigen::Index>(basis.size()));
        for (Eigen::Index n = 0; n < fhat.size(); ++n)
            fhat[n] = Cd(rng.normal(), rng.normal());
        double reference;
        if (k.isZero()) {
            fhat -= macro_project(fhat, basis);
            reference = gap;
        } else {
            reference = -spectral_abscissa(mode_generator(k, basis, L, q));
        }
        const double t_end = D.linear_efolds / reference;
        const DecayRecord rec = linear_mode_evolve(k, fhat, t_end, basis, L, D.linear_samples);
        const double rel = (rec.fitted_rate - reference) / reference;
        if (k.isZero())
            k0_ratio = rec.fitted_rate / gap;
        else
            worst_rel = std::max(worst_rel, std::abs(rel));
        monotone = monotone && rec.lyapunov_monotone;
        const double kn = std::sqrt(static_cast<double>(k.squaredNorm()));
        linear.row({num(k(0)), num(k(1)), num(k(2)), num(kn), num(t_end), num(rec.fitted_rate), num(reference),
                    num(rel), num(rec.eps), rec.lyapunov_monotone ? "true" : "false"});
        modes_json.push_back({{"k", {k(0), k(1), k(2)}},
                              {"fitted_rate", rec.fitted_rate},
                              {"reference_rate", reference},
                              {"lyapunov_monotone", rec.lyapunov_monotone}});
        log << fmt::format("  mode ({},{},{}): fitted {} vs {}\n", k(0), k(1), k(2), num(rec.fitted_rate),
                           num(reference));
    }
    rep.csv("decay_linear.csv", linear);
    checks.push_back(make_check("linear_max_rate_relative_error", worst_rel, "<=", D.linear_rate_tol));
    checks.push_back(make_check("linear_k0_rate_over_gap", k0_ratio, ">=", D.linear_k0_factor));
    checks.push_back(make_check("lyapunov_monotone", monotone ? 1.0 : 0.0, "==", 1.0));
    summary["coercivity_gap"] = gap;
    summary["linear_modes"] = modes_json;

    // nonlinear mild stepping on the torus
    const PhaseGrid tgrid = make_phase_grid(P, cfg.quad.grid_velocity, cfg.quad.grid_energy);
    const MildStepper stepper(tgrid, basis, L, q);
    DistributionGrid h = make_lattice(tgrid, D.torus_cells, [&](const Eigen::Vector3d& x, const PhasePoint& p) {
        const Eigen::Vector3d& v = p.v;
        return weight(p, P) * std::sqrt(maxwellian(p, P)) *
               (std::sin(x(0)) * v(0) + 0.5 * std::cos(x(1)) * v(1) * v(2) + 0.3 * (v(0) * v(0) - v(1) * v(1)));
    });
    const double s0 = MildStepper::sup_norm(h);
    for (double& x : h.values)
        x *= D.torus_amplitude / s0;
    CsvTable torus({"step", "t", "sup_norm"});
    std::vector<double> ts, ns, logs;
    for (int s = 0; s <= D.torus_steps; ++s) {
        const double sup = MildStepper::sup_norm(h);
        if (!std::isfinite(sup))
            throw NumericError(fmt::format("torus stepping produced a non-finite value at step {}", s));
        torus.row({num(s), num(h.time), num(sup)});
        ts.push_back(h.time);
        ns.push_back(sup);
        logs.push_back(std::log(sup));
        if (s < D.torus_steps)
            stepper.step(h, D.torus_dt);
    }
    rep.csv("decay_torus.csv", torus);
    rep.plot("decay_torus_sup_norm", ts, ns);
    const bool trivial = D.torus_amplitude == 0.0;
    const double lambda_fit = trivial ? 0.0 : -fit_slope(ts, logs);
    const double efolds = trivial ? 0.0 : logs.front() - logs.back();
    log << fmt::format("  torus: lambda_fit = {}, e-folds = {}\n", num(lambda_fit), num(efolds));
    if (!trivial) {
        checks.push_back(make_check("torus_lambda_fit", lambda_fit, ">", 0.0));
        checks.push_back(make_check("torus_efolds", efolds, ">=", D.torus_min_efolds));
    }
    summary["lambda_fit"] = lambda_fit;
    summary["torus"] = {{"cells", D.torus_cells}, {"amplitude", D.torus_amplitude}, {"efolds", efolds},
                        {"final_time", h.time}, {"trivial", trivial}};

    log_checks(log, "decay", checks);
    summary["status"] = all_pass(checks) ? "PASS" : "FAIL";
    summary["checks"] = checks_json(checks);
    rep.json_file("decay_summary.json", summary);
    return all_pass(checks) ? kExitPass : kExitFail;
}

} // namespace

int run_suite(Suite suite, const RunConfig& cfg, std::ostream& log)
{
    try {
        cfg.validate();
        if (cfg.suite && *cfg.suite != suite)
            throw ConfigError(fmt::format("config is for suite '{}', command is '{}'", suite_name(*cfg.suite),
                                          suite_name(suite)));
    } catch (const ConfigError& e) {
        log << "configuration error: " << e.what() << "\n";
        return kExitConfig;
    }
    log << fmt::format("polykin {} (seed {}, out {})\n", suite_name(suite), cfg.seed, cfg.out_dir);
    try {
        int code = kExitFail;
        switch (suite) {
        case Suite::Verify:
            code = verify_impl(cfg, log);
            break;
        case Suite::Spectrum:
            code = spectrum_impl(cfg, log);
            break;
        case Suite::Relax:
            code = relax_impl(cfg, log);
            break;
        case Suite::Decay:
            code = decay_impl(cfg, log);
            break;
        }
        log << (code == kExitPass ? "PASS\n" : "FAIL\n");
        return code;
    } catch (const ConfigError& e) {
        // raised by guards evaluated during the run (e.g. stiffness)
        log << "run aborted: " << e.what() << "\n";
    } catch (const Error& e) {
        log << "numeric failure: " << e.what() << "\n";
    } catch (const std::exception& e) {
        log << "failure: " << e.what() << "\n";
    }
    return kExitFail;
}

int cmd_verify(const RunConfig& cfg, std::ostream& log) { return run_suite(Suite::Verify, cfg, log); }
int cmd_spectrum(const RunConfig& cfg, std::ostream& log) { return run_suite(Suite::Spectrum, cfg, log); }
int cmd_relax(const RunConfig& cfg, std::ostream& log) { return run_suite(Suite::Relax, cfg, log); }
int cmd_decay(const RunConfig& cfg, std::ostream& log) { return run_suite(Suite::Decay, cfg, log); }

} // namespace polykin::cli

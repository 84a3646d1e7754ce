// Acceptance harness: one PASS/FAIL line per criterion.
//
// Criteria 1 and the weak-form half of 2 call the library directly. The rest
// run the `polykin` tool twice per suite on configs/default.ini, evaluate the
// reports against the tolerances pinned below and compare the two runs byte
// for byte.

#include "polykin/collision.hpp"
#include "polykin/gas_model.hpp"
#include "polykin/grid.hpp"
#include "polykin/quadrature.hpp"

#include <fmt/format.h>
#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <sys/wait.h>

using namespace polykin;
namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

// ---------------------------------------------------------------- pinned tolerances

constexpr double kEquilibriumSigmas = 3.0;
constexpr std::int64_t kEquilibriumSamples = 100000;
constexpr double kWeakFormSigmas = 4.0;
constexpr double kWeakFormQuadratureSlack = 0.005; ///< relative to the integral of (|v|^2/2 + I) |Q|
constexpr double kConservationTol = 1e-3;
constexpr double kRefinementTol = 0.10;
constexpr double kAlpha2Spread = 1e-6;
constexpr double kSlopeMax = -0.125;
constexpr double kAsymmetryTol = 1e-6;
constexpr double kPsdTol = 1e-10;
constexpr double kGapDriftTol = 0.05;
constexpr int kCoercivityVectors = 1000;
constexpr double kCoercivityTol = 1e-10;
constexpr double kLinearRateTol = 0.10;
constexpr double kK0Factor = 0.9;
constexpr double kPicardBound = 2.0;
constexpr int kPicardIterates = 8;
constexpr double kPicardNormTarget = 1e-2;
constexpr double kTorusEfolds = 3.0;
constexpr int kTorusCells = 4;

int failures = 0;

void report(int id, bool ok, const std::string& title, const std::string& detail)
{
    std::cout << fmt::format("{} criterion {:>2}: {} [{}]", ok ? "PASS" : "FAIL", id, title, detail) << std::endl;
    if (!ok)
        ++failures;
}

std::string slurp(const fs::path& p)
{
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

struct SuiteRun {
    int exit_code = -1;
    fs::path dir;
    json summary;
    std::map<std::string, std::string> files;
    double seconds = 0.0;
};

SuiteRun run_suite(const std::string& suite, const fs::path& dir)
{
    fs::remove_all(dir);
    SuiteRun r;
    r.dir = dir;
    const std::string cmd = fmt::format("{} {} --config {}/configs/default.ini --out {} 2>{}.log", POLYKIN_TOOL, suite,
                                        POLYKIN_SOURCE_DIR, dir.string(), dir.string());
    const auto t0 = std::chrono::steady_clock::now();
    const int status = std::system(cmd.c_str());
    r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    if (fs::exists(dir))
        for (const auto& e : fs::directory_iterator(dir))
            r.files[e.path().filename().string()] = slurp(e.path());
    const auto it = r.files.find(suite + "_summary.json");
    if (it != r.files.end())
        r.summary = json::parse(it->second);
    return r;
}

/// Measured value of a named check inside `checks` (NaN when missing).
double measured(const json& checks, const std::string& name)
{
    for (const json& c : checks)
        if (c["name"] == name)
            return c["measured"].is_number() ? c["measured"].get<double>() : NAN;
    return NAN;
}

const json& verify_entry(const json& summary, const std::string& lemma)
{
    static const json empty = json::object({{"checks", json::array()}});
    if (summary.contains("entries"))
        for (const json& e : summary["entries"])
            if (e["lemma"] == lemma)
                return e;
    return empty;
}

// ---------------------------------------------------------------- criterion 1

void equilibrium_annihilation()
{
    double worst = 0.0;
    int points = 0, bad = 0;
    const auto t0 = std::chrono::steady_clock::now();
    for (double delta : {2.0, 3.0, 5.0})
        for (double alpha : {0.0, 1.0, 2.0}) {
            ModelParams p;
            p.delta = delta;
            p.alpha = alpha;
            QuadratureSpec q;
            q.mc_samples = kEquilibriumSamples;
            const PhaseFunction M = [&](const Eigen::Vector3d& v, double i) { return maxwellian_ext(v, i, p); };
            for (int j = 0; j < 20; ++j) {
                // speeds 0..6 and energies 0.05..10 on a spiral of directions
                const double s = 6.0 * j / 19.0;
                const double th = 2.399963 * j, z = 1.0 - 2.0 * (j + 0.5) / 20.0;
                const double rho = std::sqrt(1.0 - z * z);
                const PhasePoint x{s * Eigen::Vector3d(rho * std::cos(th), rho * std::sin(th), z),
                                   0.05 + 9.95 * ((7 * j) % 20) / 19.0};
                const CollisionEstimate e = q_apply(M, M, x, p, q);
                const double z_score = e.std_error > 0.0 ? std::abs(e.value) / e.std_error : (e.value == 0.0 ? 0.0 : INFINITY);
                worst = std::max(worst, z_score);
                bad += std::abs(e.value) <= kEquilibriumSigmas * e.std_error ? 0 : 1;
                ++points;
            }
        }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    report(1, bad == 0, "Q(M,M) vanishes within 3 standard errors",
           fmt::format("{} points over 9 (delta, alpha) pairs at {} samples, max |Q|/SE = {:.3g}, {} outside, {:.1f} s",
                       points, kEquilibriumSamples, worst, bad, secs));
}

// ---------------------------------------------------------------- criterion 2

struct WeakForm {
    bool ok = false;
    std::string detail;
};

WeakForm weak_form_conservation()
{
    ModelParams p;
    p.delta = 3.0;
    QuadratureSpec quad;
    quad.mc_samples = 4000;
    // drifting cold Maxwellian mixed with a hot one
    const PhaseFunction F = [&](const Eigen::Vector3d& v, double i) {
        const double hot = std::pow(1.3, -1.5 - 0.5 * p.delta) * maxwellian_ext(v / std::sqrt(1.3), i / 1.3, p);
        return 0.5 * maxwellian_ext(v - Eigen::Vector3d(0.4, 0, 0), i, p) + 0.5 * hot;
    };
    const PhaseGrid g = make_phase_grid(p, 6, 4);
    double moments[5] = {0, 0, 0, 0, 0}, var[5] = {0, 0, 0, 0, 0}, scale = 0.0;
    for (std::size_t n = 0; n < g.size(); ++n) {
        const PhasePoint x = g.point(n);
        QuadratureSpec qn = quad;
        qn.seed = quad.seed + n;
        const CollisionEstimate q = q_apply(F, F, x, p, qn);
        const double w = g.quad_weight(n);
        const double psi[5] = {1.0, x.v(0), x.v(1), x.v(2), 0.5 * x.v.squaredNorm() + x.i};
        for (int k = 0; k < 5; ++k) {
            moments[k] += w * psi[k] * q.value;
            var[k] += std::pow(w * psi[k] * q.std_error, 2);
        }
        scale += w * (0.5 * x.v.squaredNorm() + x.i) * std::abs(q.value);
    }
    WeakForm out;
    out.ok = true;
    double worst = 0.0;
    for (int k = 0; k < 5; ++k) {
        const double tol = kWeakFormSigmas * std::sqrt(var[k]) + kWeakFormQuadratureSlack * scale;
        out.ok = out.ok && std::abs(moments[k]) <= tol;
        worst = std::max(worst, std::abs(moments[k]) / tol);
    }
    out.detail = fmt::format("weak form max |moment| / tolerance = {:.3g}", worst);
    return out;
}

} // namespace

int main()
{
    const fs::path root = fs::temp_directory_path() / "polykin_acceptance";
    fs::create_directories(root);

    equilibrium_annihilation();

    std::map<std::string, SuiteRun> first, second;
    for (const std::string suite : {"verify", "spectrum", "relax", "decay"}) {
        first[suite] = run_suite(suite, root / (suite + "_a"));
        second[suite] = run_suite(suite, root / (suite + "_b"));
        std::cout << fmt::format("  ran {} twice: exit {} / {}, {:.1f} s + {:.1f} s", suite, first[suite].exit_code,
                                 second[suite].exit_code, first[suite].seconds, second[suite].seconds)
                  << std::endl;
    }

    // 2. conservation
    {
        const WeakForm wf = weak_form_conservation();
        const json& s = first["relax"].summary;
        const double drift = s.contains("checks") ? measured(s["checks"], "invariant_drift") : NAN;
        const bool relax_ok = first["relax"].exit_code == 0 && drift <= kConservationTol;
        report(2, wf.ok && relax_ok, "collision invariants are conserved",
               fmt::format("{}; relaxation invariant drift {:.3g} (<= {})", wf.detail, drift, kConservationTol));
    }

    const json& ver = first["verify"].summary;
    // 3. collision frequency
    {
        const json& c = verify_entry(ver, "lemma_2_1")["checks"];
        const double sup = measured(c, "sup_ratio"), inf = measured(c, "inf_ratio");
        const double drift = measured(c, "refinement_drift"), spread = measured(c, "alpha2_relative_spread");
        const bool ok = std::isfinite(sup) && inf > 0.0 && drift < kRefinementTol && spread < kAlpha2Spread;
        report(3, ok, "nu (1+|v|+sqrt I)^(alpha-2) bounded above and below",
               fmt::format("sup {:.4g}, inf {:.4g}, node-doubling drift {:.3g}, alpha=2 spread {:.3g}", sup, inf, drift,
                           spread));
    }
    // 4. weighted kernel integral
    {
        const json& c = verify_entry(ver, "lemma_2_2")["checks"];
        const double sup = measured(c, "sup_scaled"), drift = measured(c, "refinement_drift");
        const double slope = measured(c, "large_energy_slope");
        const bool ok = std::isfinite(sup) && drift < kRefinementTol && slope <= kSlopeMax;
        report(4, ok, "weighted kernel integral bounded, refinement-stable, decays in I",
               fmt::format("sup {:.4g}, sample-doubling drift {:.3g}, large-I slope {:.3g} (<= {})", sup, drift, slope,
                           kSlopeMax));
    }
    // 5. Gamma bound
    {
        const json& c = verify_entry(ver, "lemma_2_3")["checks"];
        const double sup = measured(c, "sup_ratio"), drift = measured(c, "refinement_drift");
        report(5, std::isfinite(sup) && drift < kRefinementTol, "|w Gamma(f,f)| / (nu |wf|^2) bounded",
               fmt::format("sup over 50 random f {:.4g}, sample-doubling drift {:.3g}", sup, drift));
    }
    // 6. structure and coercivity of L
    {
        const json& c1 = verify_entry(ver, "prop_4_1")["checks"];
        const json& c2 = verify_entry(ver, "prop_4_2")["checks"];
        const double asym = measured(c1, "relative_asymmetry"), mine = measured(c1, "min_eigenvalue_relative");
        const double d0 = measured(c1, "kernel_dimension"), d1 = measured(c1, "kernel_dimension_refined");
        const double gap = measured(c2, "gap"), drift = measured(c2, "gap_refinement_drift");
        const double excess = measured(c2, "coercivity_min_relative_excess");
        const std::string coer = slurp(first["verify"].dir / "prop_4_2_coercivity.csv");
        const long vectors = std::count(coer.begin(), coer.end(), '\n') - 1;
        const bool ok = asym < kAsymmetryTol && mine >= -kPsdTol && d0 == 5 && d1 == 5 && gap > 0.0 &&
                        drift < kGapDriftTol && excess >= -kCoercivityTol && vectors == kCoercivityVectors;
        report(6, ok, "L symmetric, PSD, 5-dim kernel, stable gap, coercive",
               fmt::format("asymmetry {:.2g}, min eig/max {:.2g}, kernel {}/{}, gap {:.4g}, basis-doubling drift {:.3g} "
                           "(< {}), min coercivity excess {:.3g} over {} vectors",
                           asym, mine, d0, d1, gap, drift, kGapDriftTol, excess, vectors));
    }
    // 7. K bounded
    {
        const json& c = verify_entry(ver, "lemma_4_3")["checks"];
        const double kn = measured(c, "k_norm"), drift = measured(c, "k_norm_refinement_drift");
        report(7, std::isfinite(kn) && drift < kRefinementTol, "Galerkin norm of K finite and refinement-stable",
               fmt::format("|K| {:.4g}, basis-doubling drift {:.3g}", kn, drift));
    }

    const json& dec = first["decay"].summary;
    const json dchecks = dec.contains("checks") ? dec["checks"] : json::array();
    // 8. linear modes
    {
        double worst = 0.0, k0 = NAN;
        bool monotone = dec.contains("linear_modes") && !dec["linear_modes"].empty();
        int nonzero = 0;
        if (dec.contains("linear_modes"))
            for (const json& m : dec["linear_modes"]) {
                const double fit = m["fitted_rate"], ref = m["reference_rate"];
                const auto& k = m["k"];
                monotone = monotone && m["lyapunov_monotone"].get<bool>();
                if (k[0] == 0 && k[1] == 0 && k[2] == 0) {
                    k0 = fit / ref;
                } else {
                    worst = std::max(worst, std::abs(fit - ref) / ref);
                    ++nonzero;
                }
            }
        const bool ok = nonzero > 0 && worst <= kLinearRateTol && k0 >= kK0Factor && monotone;
        report(8, ok, "Fourier-mode decay follows the spectral abscissa",
               fmt::format("{} wave vectors with 1 <= |k| <= 3: max relative rate error {:.3g} (<= {}); k=0 rate/gap "
                           "{:.4g} (>= {}); Lyapunov monotone {}",
                           nonzero, worst, kLinearRateTol, k0, kK0Factor, monotone));
    }
    // 9. Picard iteration
    {
        double factor = dec.value("boundedness_factor", NAN), max_ratio = 0.0, min_f = INFINITY;
        const std::size_t n = dec.contains("sup_norm_series") ? dec["sup_norm_series"].size() : 0;
        if (dec.contains("contraction_ratios"))
            for (const json& r : dec["contraction_ratios"])
                max_ratio = std::max(max_ratio, r.get<double>());
        std::istringstream csv(slurp(first["decay"].dir / "decay_picard.csv"));
        std::string line;
        std::getline(csv, line);
        while (std::getline(csv, line))
            min_f = std::min(min_f, std::stod(line.substr(line.rfind(',') + 1)));
        const bool ok = n == kPicardIterates + 1 && factor <= kPicardBound && max_ratio < 1.0 && min_f >= 0.0;
        report(9, ok, "Picard iterates bounded, nonnegative, contracting",
               fmt::format("|wf0| = {}, T1 = {:.4g}, max |wf^n|/|wf0| = {:.4g} for n <= {}, min F = {:.3g}, max ratio "
                           "{:.3g} (target 1/2 {})",
                           kPicardNormTarget, dec.value("T1", NAN), factor, n ? n - 1 : 0, min_f, max_ratio,
                           max_ratio <= 0.5 ? "met" : "missed"));
    }
    // 10. torus decay
    {
        const double lambda = dec.value("lambda_fit", NAN);
        const double efolds = dec.contains("torus") ? dec["torus"].value("efolds", NAN) : NAN;
        const int cells = dec.contains("torus") ? dec["torus"].value("cells", 0) : 0;
        const bool ok = cells == kTorusCells && lambda > 0.0 && efolds >= kTorusEfolds;
        report(10, ok, "torus mild stepping decays exponentially",
               fmt::format("N_x = {}, lambda_fit {:.4g}, {:.3g} e-folds (>= {}), suite time {:.1f} s", cells, lambda,
                           efolds, kTorusEfolds, first["decay"].seconds));
    }
    // 11. reproducibility
    {
        bool ok = true;
        std::string detail;
        for (const auto& [suite, a] : first) {
            const SuiteRun& b = second[suite];
            const bool same = !a.files.empty() && a.files == b.files;
            ok = ok && same && a.exit_code == 0 && b.exit_code == 0;
            detail += fmt::format("{}{} {} files {}", detail.empty() ? "" : "; ", suite, a.files.size(),
                                  same ? "identical" : "DIFFER");
        }
        report(11, ok, "every suite is bit-identical across two runs with the same seed", detail);
    }

    std::cout << fmt::format("{} of 11 criteria failed", failures) << std::endl;
    return failures == 0 ? 0 : 1;
}

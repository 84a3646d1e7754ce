#pragma once

#include "polykin/gas_model.hpp"
#include "polykin/quadrature.hpp"

#include <cstdint>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

namespace polykin::cli {

enum class Suite { Verify, Spectrum, Relax, Decay };

/// Parse "verify", "spectrum", "relax" or "decay"; throws ConfigError otherwise.
Suite parse_suite(const std::string& name);
const char* suite_name(Suite s);

/// Truncation of the Hermite-Laguerre basis and the factor used for refinement checks.
struct BasisConfig {
    int n_v = 4;
    int n_i = 2;
    int refine = 2;
};

/// Sweep ranges and PASS thresholds of the verify suite.
struct VerifyConfig {
    // sweep of (|v|, I) used by the collision frequency and weighted kernel checks
    double v_max = 12.0;
    int v_points = 7;
    double i_min = 0.01;
    double i_max = 50.0;
    int i_points = 6;

    double nu_refine_tol = 0.10;      ///< relative change of sup/inf under node doubling
    double nu_alpha2_spread = 1e-6;   ///< relative spread of nu when alpha = 2

    double kw_eps = 1.0 / 64.0;
    double kw_m = 1.0 / 8.0;
    std::int64_t kw_samples = 20000;
    double kw_refine_tol = 0.10;
    double kw_slope_i_min = 20.0;     ///< large-I slope is fitted over [i_min, 10 i_min]
    int kw_slope_points = 6;
    double kw_slope_max = -0.125;

    int gamma_functions = 50;
    std::int64_t gamma_samples = 10000;
    double gamma_refine_tol = 0.10;

    double asymmetry_tol = 1e-6;
    double psd_tol = 1e-10;           ///< relative to the largest eigenvalue
    double gap_drift_tol = 0.05;
    int coercivity_vectors = 1000;
    double coercivity_tol = 1e-10;    ///< relative slack in <f, L f> >= lambda_0 |P2 f|^2
    double k_norm_drift_tol = 0.10;
};

struct SpectrumConfig {
    int k_max = 2;
    double near_zero_tol = 1e-8;      ///< relative to the largest |eigenvalue|
};

struct RelaxConfig {
    int grid_v = 4;
    int grid_i = 2;
    double dt = 0.05;
    int steps = 50;
    std::string initial = "bimodal"; ///< "bimodal" or "equilibrium"
    double separation = 1.0;
    double conservation_tol = 1e-3;
    double entropy_slack = 2.0;       ///< allowed rise in units of the per-step entropy error
};

struct DecayConfig {
    double f0_norm = 0.01;
    double c1 = 1.0;
    int picard_iters = 8;
    int picard_grid_v = 4;
    int picard_grid_i = 2;
    double bound_factor = 2.0;
    double ratio_max = 1.0;

    int linear_k_max = 3;
    double linear_efolds = 18.0;      ///< t_end = linear_efolds / |abscissa| per mode
    int linear_samples = 200;
    double linear_rate_tol = 0.10;
    double linear_k0_factor = 0.9;

    double torus_amplitude = 0.01;
    int torus_cells = 4;
    double torus_dt = 0.05;
    int torus_steps = 120;
    double torus_min_efolds = 3.0;
};

struct RunConfig {
    ModelParams model;
    QuadratureSpec quad;
    std::optional<Suite> suite;       ///< if set, must match the command
    std::uint64_t seed = QuadratureSpec{}.seed;
    std::string out_dir = "polykin-out";
    bool emit_plot_data = false;
    BasisConfig basis;
    VerifyConfig verify;
    SpectrumConfig spectrum;
    RelaxConfig relax;
    DecayConfig decay;

    /// Range checks of every field; throws ConfigError.
    void validate() const;
};

/**
 * Read a configuration in INI form ([section] and key = value lines).
 * Unknown sections or keys and malformed values raise ConfigError.
 */
RunConfig parse_config(std::istream& in);
RunConfig load_config(const std::string& path);

/// Command line and environment overrides. Flags take precedence over the
/// environment, which takes precedence over the file.
struct Overrides {
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out_dir;
    bool emit_plot_data = false;
};

/// Apply POLYKIN_SEED / POLYKIN_OUT_DIR from `env`, then the flags.
void apply_overrides(RunConfig& cfg, const Overrides& flags, const std::map<std::string, std::string>& env);

/// POLYKIN_SEED and POLYKIN_OUT_DIR from the process environment.
std::map<std::string, std::string> process_environment();

/// Exit codes of the commands.
inline constexpr int kExitPass = 0;
inline constexpr int kExitFail = 1;
inline constexpr int kExitConfig = 2;

/**
 * Run one suite. Report files go to cfg.out_dir; progress and diagnostics to
 * `log`. Returns kExitPass when every check passes, kExitFail when a check
 * fails or a numerical routine throws, kExitConfig for an invalid config.
 */
int run_suite(Suite suite, const RunConfig& cfg, std::ostream& log);

int cmd_verify(const RunConfig& cfg, std::ostream& log);
int cmd_spectrum(const RunConfig& cfg, std::ostream& log);
int cmd_relax(const RunConfig& cfg, std::ostream& log);
int cmd_decay(const RunConfig& cfg, std::ostream& log);

// ---------------------------------------------------------------- report output

/// Quote a CSV field when it contains a comma, quote or line break.
std::string csv_field(const std::string& s);

/// Shortest round-trip text of a double ("nan", "inf", "-inf" for non-finite values).
std::string format_number(double x);

/// In-memory CSV table with a header row.
class CsvTable {
public:
    explicit CsvTable(std::vector<std::string> header);
    CsvTable& row(const std::vector<std::string>& fields);
    std::string str() const;
    std::size_t rows() const { return rows_.size(); }

private:
    std::vector<std::string> header_;
    std::vector<std::vector<std::string>> rows_;
};

/// Write `content` to `path` through a temporary file in the same directory and a rename.
void write_atomic(const std::string& path, const std::string& content);

/// Two-column whitespace-separated series for external plotting.
std::string plot_series(const std::vector<double>& x, const std::vector<double>& y);

} // namespace polykin::cli

#include "polykin/cli.hpp"

#include "polykin/errors.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <fmt/format.h>

#include <charconv>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <sstream>
#include <unistd.h>

namespace polykin::cli {

namespace {

std::string trim(const std::string& s)
{
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos)
        return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

template <class T>
T parse_value(const std::string& key, const std::string& raw)
{
    const std::string text = trim(raw);
    if constexpr (std::is_same_v<T, std::string>) {
        return text;
    } else if constexpr (std::is_same_v<T, bool>) {
        if (text == "true" || text == "1" || text == "yes" || text == "on")
            return true;
        if (text == "false" || text == "0" || text == "no" || text == "off")
            return false;
        throw ConfigError(fmt::format("{}: expected a boolean, got '{}'", key, text));
    } else {
        T value{};
        const char* first = text.data();
        const char* last = text.data() + text.size();
        const auto [ptr, ec] = std::from_chars(first, last, value);
        if (ec != std::errc() || ptr != last || text.empty())
            throw ConfigError(fmt::format("{}: cannot parse '{}'", key, text));
        if constexpr (std::is_floating_point_v<T>) {
            if (!std::isfinite(value))
                throw ConfigError(fmt::format("{}: value must be finite", key));
        }
        return value;
    }
}

using Setter = std::function<void(RunConfig&, const std::string& key, const std::string& text)>;

template <class T, class Access>
Setter bind(Access access)
{
    return [access](RunConfig& c, const std::string& key, const std::string& text) {
        access(c) = parse_value<T>(key, text);
    };
}

#define POLYKIN_KEY(name, type, expr) \
    { name, bind<type>([](RunConfig& c) -> type& { return expr; }) }

const std::map<std::string, Setter>& schema()
{
    static const std::map<std::string, Setter> table = {
        {"run.suite",
         [](RunConfig& c, const std::string&, const std::string& text) { c.suite = parse_suite(trim(text)); }},
        POLYKIN_KEY("run.seed", std::uint64_t, c.seed),
        POLYKIN_KEY("run.out_dir", std::string, c.out_dir),
        POLYKIN_KEY("run.emit_plot_data", bool, c.emit_plot_data),

        POLYKIN_KEY("model.delta", double, c.model.delta),
        POLYKIN_KEY("model.alpha", double, c.model.alpha),
        POLYKIN_KEY("model.c_sigma", double, c.model.c_sigma),
        POLYKIN_KEY("model.beta", double, c.model.beta),

        POLYKIN_KEY("quadrature.nu_radial", int, c.quad.nu_radial),
        POLYKIN_KEY("quadrature.nu_polar", int, c.quad.nu_polar),
        POLYKIN_KEY("quadrature.nu_internal", int, c.quad.nu_internal),
        POLYKIN_KEY("quadrature.k2_transverse", int, c.quad.k2_transverse),
        POLYKIN_KEY("quadrature.k2_parallel", int, c.quad.k2_parallel),
        POLYKIN_KEY("quadrature.k2_tol", double, c.quad.k2_tol),
        POLYKIN_KEY("quadrature.mc_samples", std::int64_t, c.quad.mc_samples),
        POLYKIN_KEY("quadrature.kernel_samples", std::int64_t, c.quad.kernel_samples),
        POLYKIN_KEY("quadrature.l_samples", std::int64_t, c.quad.l_samples),
        POLYKIN_KEY("quadrature.relax_samples", std::int64_t, c.quad.relax_samples),
        POLYKIN_KEY("quadrature.picard_samples", std::int64_t, c.quad.picard_samples),
        POLYKIN_KEY("quadrature.gamma_tensor_samples", std::int64_t, c.quad.gamma_tensor_samples),
        POLYKIN_KEY("quadrature.grid_velocity", int, c.quad.grid_velocity),
        POLYKIN_KEY("quadrature.grid_energy", int, c.quad.grid_energy),
        POLYKIN_KEY("quadrature.time_panels", int, c.quad.time_panels),
        POLYKIN_KEY("quadrature.time_nodes", int, c.quad.time_nodes),

        POLYKIN_KEY("basis.n_v", int, c.basis.n_v),
        POLYKIN_KEY("basis.n_i", int, c.basis.n_i),
        POLYKIN_KEY("basis.refine", int, c.basis.refine),

        POLYKIN_KEY("verify.v_max", double, c.verify.v_max),
        POLYKIN_KEY("verify.v_points", int, c.verify.v_points),
        POLYKIN_KEY("verify.i_min", double, c.verify.i_min),
        POLYKIN_KEY("verify.i_max", double, c.verify.i_max),
        POLYKIN_KEY("verify.i_points", int, c.verify.i_points),
        POLYKIN_KEY("verify.nu_refine_tol", double, c.verify.nu_refine_tol),
        POLYKIN_KEY("verify.nu_alpha2_spread", double, c.verify.nu_alpha2_spread),
        POLYKIN_KEY("verify.kw_eps", double, c.verify.kw_eps),
        POLYKIN_KEY("verify.kw_m", double, c.verify.kw_m),
        POLYKIN_KEY("verify.kw_samples", std::int64_t, c.verify.kw_samples),
        POLYKIN_KEY("verify.kw_refine_tol", double, c.verify.kw_refine_tol),
        POLYKIN_KEY("verify.kw_slope_i_min", double, c.verify.kw_slope_i_min),
        POLYKIN_KEY("verify.kw_slope_points", int, c.verify.kw_slope_points),
        POLYKIN_KEY("verify.kw_slope_max", double, c.verify.kw_slope_max),
        POLYKIN_KEY("verify.gamma_functions", int, c.verify.gamma_functions),
        POLYKIN_KEY("verify.gamma_samples", std::int64_t, c.verify.gamma_samples),
        POLYKIN_KEY("verify.gamma_refine_tol", double, c.verify.gamma_refine_tol),
        POLYKIN_KEY("verify.asymmetry_tol", double, c.verify.asymmetry_tol),
        POLYKIN_KEY("verify.psd_tol", double, c.verify.psd_tol),
        POLYKIN_KEY("verify.gap_drift_tol", double, c.verify.gap_drift_tol),
        POLYKIN_KEY("verify.coercivity_vectors", int, c.verify.coercivity_vectors),
        POLYKIN_KEY("verify.coercivity_tol", double, c.verify.coercivity_tol),
        POLYKIN_KEY("verify.k_norm_drift_tol", double, c.verify.k_norm_drift_tol),

        POLYKIN_KEY("spectrum.k_max", int, c.spectrum.k_max),
        POLYKIN_KEY("spectrum.near_zero_tol", double, c.spectrum.near_zero_tol),

        POLYKIN_KEY("relax.grid_v", int, c.relax.grid_v),
        POLYKIN_KEY("relax.grid_i", int, c.relax.grid_i),
        POLYKIN_KEY("relax.dt", double, c.relax.dt),
        POLYKIN_KEY("relax.steps", int, c.relax.steps),
        POLYKIN_KEY("relax.initial", std::string, c.relax.initial),
        POLYKIN_KEY("relax.separation", double, c.relax.separation),
        POLYKIN_KEY("relax.conservation_tol", double, c.relax.conservation_tol),
        POLYKIN_KEY("relax.entropy_slack", double, c.relax.entropy_slack),

        POLYKIN_KEY("decay.f0_norm", double, c.decay.f0_norm),
        POLYKIN_KEY("decay.c1", double, c.decay.c1),
        POLYKIN_KEY("decay.picard_iters", int, c.decay.picard_iters),
        POLYKIN_KEY("decay.picard_grid_v", int, c.decay.picard_grid_v),
        POLYKIN_KEY("decay.picard_grid_i", int, c.decay.picard_grid_i),
        POLYKIN_KEY("decay.bound_factor", double, c.decay.bound_factor),
        POLYKIN_KEY("decay.ratio_max", double, c.decay.ratio_max),
        POLYKIN_KEY("decay.linear_k_max", int, c.decay.linear_k_max),
        POLYKIN_KEY("decay.linear_efolds", double, c.decay.linear_efolds),
        POLYKIN_KEY("decay.linear_samples", int, c.decay.linear_samples),
        POLYKIN_KEY("decay.linear_rate_tol", double, c.decay.linear_rate_tol),
        POLYKIN_KEY("decay.linear_k0_factor", double, c.decay.linear_k0_factor),
        POLYKIN_KEY("decay.torus_amplitude", double, c.decay.torus_amplitude),
        POLYKIN_KEY("decay.torus_cells", int, c.decay.torus_cells),
        POLYKIN_KEY("decay.torus_dt", double, c.decay.torus_dt),
        POLYKIN_KEY("decay.torus_steps", int, c.decay.torus_steps),
        POLYKIN_KEY("decay.torus_min_efolds", double, c.decay.torus_min_efolds),
    };
    return table;
}

#undef POLYKIN_KEY

void require(bool ok, const std::string& what)
{
    if (!ok)
        throw ConfigError(what);
}

} // namespace

Suite parse_suite(const std::string& name)
{
    if (name == "verify")
        return Suite::Verify;
    if (name == "spectrum")
        return Suite::Spectrum;
    if (name == "relax")
        return Suite::Relax;
    if (name == "decay")
        return Suite::Decay;
    throw ConfigError("unknown suite '" + name + "' (expected verify, spectrum, relax or decay)");
}

const char* suite_name(Suite s)
{
    switch (s) {
    case Suite::Verify:
        return "verify";
    case Suite::Spectrum:
        return "spectrum";
    case Suite::Relax:
        return "relax";
    case Suite::Decay:
        return "decay";
    }
    return "?";
}

void RunConfig::validate() const
{
    model.validate();
    quad.validate();
    require(!out_dir.empty(), "run.out_dir must not be empty");

    require(basis.n_v >= 2, "basis.n_v must be >= 2 (the basis has to contain the collision invariants)");
    require(basis.n_i >= 1, "basis.n_i must be >= 1");
    require(basis.refine >= 1, "basis.refine must be >= 1");
    require(basis.n_v * basis.refine <= 12 && basis.n_i * basis.refine <= 8,
            "refined basis exceeds n_v = 12, n_i = 8");

    const VerifyConfig& v = verify;
    require(v.v_max > 0.0 && v.v_points >= 2, "verify.v_max must be positive and v_points >= 2");
    require(v.i_min > 0.0 && v.i_max > v.i_min && v.i_points >= 2,
            "verify needs 0 < i_min < i_max and i_points >= 2");
    require(v.kw_eps >= 0.0 && v.kw_eps <= 1.0 / 64.0, "verify.kw_eps must lie in [0, 1/64]");
    require(v.kw_m >= 0.0 && v.kw_m <= 1.0 / 8.0, "verify.kw_m must lie in [0, 1/8]");
    require(v.kw_samples > 0 && v.gamma_samples > 0, "verify sample counts must be positive");
    require(v.kw_slope_i_min > 0.0 && v.kw_slope_points >= 2, "verify.kw_slope_i_min > 0 and kw_slope_points >= 2");
    require(v.gamma_functions >= 1 && v.coercivity_vectors >= 1, "verify function/vector counts must be >= 1");
    for (double tol : {v.nu_refine_tol, v.nu_alpha2_spread, v.kw_refine_tol, v.gamma_refine_tol, v.asymmetry_tol,
                       v.psd_tol, v.gap_drift_tol, v.coercivity_tol, v.k_norm_drift_tol})
        require(tol >= 0.0, "verify tolerances must be nonnegative");

    require(spectrum.k_max >= 0 && spectrum.k_max <= 6, "spectrum.k_max must lie in [0, 6]");
    require(spectrum.near_zero_tol > 0.0, "spectrum.near_zero_tol must be positive");

    require(relax.grid_v >= 2 && relax.grid_i >= 1, "relax grid needs grid_v >= 2 and grid_i >= 1");
    require(relax.dt > 0.0 && relax.steps >= 1, "relax.dt must be positive and relax.steps >= 1");
    require(relax.initial == "bimodal" || relax.initial == "equilibrium",
            "relax.initial must be 'bimodal' or 'equilibrium'");
    require(relax.separation >= 0.0 && relax.separation * relax.separation < 3.0,
            "relax.separation must lie in [0, sqrt(3))");
    require(relax.conservation_tol >= 0.0 && relax.entropy_slack >= 0.0, "relax tolerances must be nonnegative");

    const DecayConfig& d = decay;
    require(d.f0_norm >= 0.0, "decay.f0_norm must be nonnegative");
    require(d.c1 > 0.0, "decay.c1 must be positive");
    require(d.picard_iters >= 1, "decay.picard_iters must be >= 1");
    require(d.picard_grid_v >= 2 && d.picard_grid_i >= 1, "decay Picard grid needs grid_v >= 2 and grid_i >= 1");
    require(d.bound_factor > 0.0 && d.ratio_max > 0.0, "decay.bound_factor and ratio_max must be positive");
    require(d.linear_k_max >= 1 && d.linear_k_max <= 6, "decay.linear_k_max must lie in [1, 6]");
    require(d.linear_efolds > 0.0 && d.linear_samples >= 4, "decay.linear_efolds > 0 and linear_samples >= 4");
    require(d.linear_rate_tol >= 0.0 && d.linear_k0_factor > 0.0, "decay linear thresholds out of range");
    require(d.torus_amplitude >= 0.0, "decay.torus_amplitude must be nonnegative");
    require(d.torus_cells >= 1 && d.torus_cells <= 8, "decay.torus_cells must lie in [1, 8]");
    require(d.torus_dt > 0.0 && d.torus_steps >= 2, "decay.torus_dt must be positive and torus_steps >= 2");
    require(d.torus_min_efolds >= 0.0, "decay.torus_min_efolds must be nonnegative");
    require(quad.grid_velocity > basis.n_v && quad.grid_energy > basis.n_i,
            "quadrature.grid_velocity / grid_energy must exceed basis.n_v / basis.n_i");
}

RunConfig parse_config(std::istream& in)
{
    boost::property_tree::ptree tree;
    try {
        boost::property_tree::ini_parser::read_ini(in, tree);
    } catch (const boost::property_tree::ini_parser_error& e) {
        throw ConfigError(fmt::format("config line {}: {}", e.line(), e.message()));
    }
    RunConfig cfg;
    const auto& table = schema();
    for (const auto& [section, body] : tree) {
        if (body.empty() && !body.data().empty())
            throw ConfigError("config key '" + section + "' outside of a section");
        for (const auto& [key, value] : body) {
            const std::string full = section + "." + key;
            const auto it = table.find(full);
            if (it == table.end())
                throw ConfigError("unknown config key '" + full + "'");
            it->second(cfg, full, value.data());
        }
    }
    cfg.quad.seed = cfg.seed;
    return cfg;
}

RunConfig load_config(const std::string& path)
{
    std::ifstream in(path);
    if (!in)
        throw ConfigError("cannot open config file '" + path + "'");
    return parse_config(in);
}

void apply_overrides(RunConfig& cfg, const Overrides& flags, const std::map<std::string, std::string>& env)
{
    if (const auto it = env.find("POLYKIN_SEED"); it != env.end())
        cfg.seed = parse_value<std::uint64_t>("POLYKIN_SEED", it->second);
    if (const auto it = env.find("POLYKIN_OUT_DIR"); it != env.end())
        cfg.out_dir = it->second;
    if (flags.seed)
        cfg.seed = *flags.seed;
    if (flags.out_dir)
        cfg.out_dir = *flags.out_dir;
    if (flags.emit_plot_data)
        cfg.emit_plot_data = true;
    cfg.quad.seed = cfg.seed;
}

std::map<std::string, std::string> process_environment()
{
    std::map<std::string, std::string> env;
    for (const char* name : {"POLYKIN_SEED", "POLYKIN_OUT_DIR"})
        if (const char* value = std::getenv(name))
            env[name] = value;
    return env;
}

// ---------------------------------------------------------------- report output

std::string csv_field(const std::string& s)
{
    if (s.find_first_of(",\"\r\n") == std::string::npos)
        return s;
    std::string out = "\"";
    for (char ch : s) {
        if (ch == '"')
            out += '"';
        out += ch;
    }
    out += '"';
    return out;
}

std::string format_number(double x)
{
    if (std::isnan(x))
        return "nan";
    if (std::isinf(x))
        return x > 0 ? "inf" : "-inf";
    return fmt::format("{}", x);
}

CsvTable::CsvTable(std::vector<std::string> header) : header_(std::move(header)) {}

CsvTable& CsvTable::row(const std::vector<std::string>& fields)
{
    if (fields.size() != header_.size())
        throw UsageError(fmt::format("CSV row has {} fields, header has {}", fields.size(), header_.size()));
    rows_.push_back(fields);
    return *this;
}

std::string CsvTable::str() const
{
    std::string out;
    auto line = [&](const std::vector<std::string>& fields) {
        for (std::size_t k = 0; k < fields.size(); ++k) {
            if (k)
                out += ',';
            out += csv_field(fields[k]);
        }
        out += "\r\n";
    };
    line(header_);
    for (const auto& r : rows_)
        line(r);
    return out;
}

void write_atomic(const std::string& path, const std::string& content)
{
    namespace fs = std::filesystem;
    const fs::path target(path);
    const fs::path tmp = target.parent_path() / fmt::format(".{}.tmp{}", target.filename().string(), ::getpid());
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out)
            throw std::runtime_error("cannot write '" + tmp.string() + "'");
        out.write(content.data(), static_cast<std::streamsize>(content.size()));
        out.flush();
        if (!out)
            throw std::runtime_error("write to '" + tmp.string() + "' failed");
    }
    std::error_code ec;
    fs::rename(tmp, target, ec);
    if (ec) {
        fs::remove(tmp);
        throw std::runtime_error("cannot rename '" + tmp.string() + "' to '" + path + "': " + ec.message());
    }
}

std::string plot_series(const std::vector<double>& x, const std::vector<double>& y)
{
    if (x.size() != y.size())
        throw UsageError("plot_series: series differ in length");
    std::string out;
    for (std::size_t k = 0; k < x.size(); ++k)
        out += format_number(x[k]) + " " + format_number(y[k]) + "\n";
    return out;
}

} // namespace polykin::cli

#include "polykin/cli.hpp"
#include "polykin/errors.hpp"

#include <CLI11.hpp>

#include <iostream>

int main(int argc, char** argv)
{
    using namespace polykin::cli;

    CLI::App app{"polykin: polyatomic Boltzmann collision model numerics"};
    std::string suite_text, config_path;
    std::uint64_t seed = 0;
    std::string out_dir;
    bool plot_data = false;
    app.add_option("suite", suite_text, "verify | spectrum | relax | decay")
        ->required()
        ->check(CLI::IsMember({"verify", "spectrum", "relax", "decay"}));
    app.add_option("--config", config_path, "INI configuration file")->required();
    auto* seed_opt = app.add_option("--seed", seed, "RNG seed (overrides POLYKIN_SEED and the config)");
    auto* out_opt = app.add_option("--out", out_dir, "output directory (overrides POLYKIN_OUT_DIR and the config)");
    app.add_flag("--emit-plot-data", plot_data, "write (x, y) series files for plotting");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitConfig;
    }

    RunConfig cfg;
    try {
        cfg = load_config(config_path);
        Overrides flags;
        if (*seed_opt)
            flags.seed = seed;
        if (*out_opt)
            flags.out_dir = out_dir;
        flags.emit_plot_data = plot_data;
        apply_overrides(cfg, flags, process_environment());
    } catch (const polykin::ConfigError& e) {
        std::cerr << "configuration error: " << e.what() << "\n";
        return kExitConfig;
    }
    return run_suite(parse_suite(suite_text), cfg, std::cerr);
}

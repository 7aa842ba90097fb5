// Command-line front end: runs scenario configs (or built-ins) and prints the
// catalog. Exit codes: 0 all verdicts pass, 1 any verdict failed, 2 usage or
// configuration error.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "stochmech/stochmech.hpp"

namespace {

std::string read_file(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw stochmech::Error("cannot read config file '" + path + "'");
    std::ostringstream ss;
    ss << is.rdbuf();
    return ss.str();
}

void print_summary(const stochmech::RunSummary& summary) {
    std::printf("scenario %s (model %s, seed %llu)\n", summary.scenario.c_str(),
                summary.model.c_str(), static_cast<unsigned long long>(summary.seed));
    for (const auto& h : summary.headline) {
        if (h.exact)
            std::printf("  [%s] %-28s %.10g (exact)\n", h.verdict.c_str(), h.name.c_str(), h.value);
        else if (h.uncertainty > 0.0)
            std::printf("  [%s] %-28s %.10g +- %.3g\n", h.verdict.c_str(), h.name.c_str(), h.value,
                        h.uncertainty);
        else
            std::printf("  [%s] %-28s %.10g\n", h.verdict.c_str(), h.name.c_str(), h.value);
        std::printf("         %s\n", h.reference.c_str());
    }
    if (summary.excluded_paths > 0)
        std::printf("  excluded paths: %zu\n", summary.excluded_paths);
    std::printf("  wall time: %.2f s\n", summary.wall_seconds);
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"stochmech - stochastic-mechanics simulation scenarios"};
    app.require_subcommand(1);

    std::string config_path;
    std::string builtin_name;
    std::string out_dir;
    std::uint64_t seed_override = 0;
    bool seed_given = false;
    unsigned threads = 0;
    bool emit_plots = false;

    auto* run = app.add_subcommand("run", "Run a scenario from a TOML config or a built-in name");
    run->add_option("config", config_path, "scenario config file (TOML)");
    run->add_option("--builtin", builtin_name, "built-in scenario name (see `stochmech catalog`)");
    run->add_option("--out", out_dir, "output directory (default: out/<scenario>)");
    auto* seed_opt = run->add_option("--seed", seed_override, "override the master seed");
    run->add_option("--threads", threads, "worker threads (default: hardware)");
    run->add_flag("--emit-plots", emit_plots, "also write a plot script next to the CSVs");

    auto* catalog = app.add_subcommand("catalog", "List the built-in scenarios");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (catalog->parsed()) {
            for (const auto& entry : stochmech::scenario_catalog())
                std::printf("%-24s %s\n", entry.name.c_str(), entry.description.c_str());
            return 0;
        }

        seed_given = seed_opt->count() > 0;
        if (config_path.empty() == builtin_name.empty()) {
            std::fprintf(stderr, "error: pass exactly one of <config> or --builtin <name>\n");
            return 2;
        }

        std::string text;
        std::string default_name;
        if (!builtin_name.empty()) {
            const stochmech::CatalogEntry* entry = stochmech::find_catalog_entry(builtin_name);
            if (!entry) {
                std::fprintf(stderr, "error: unknown built-in scenario '%s'\n",
                             builtin_name.c_str());
                return 2;
            }
            text = entry->config_text;
            default_name = entry->name;
        } else {
            text = read_file(config_path);
            default_name = std::filesystem::path(config_path).stem().string();
        }

        stochmech::ScenarioConfig cfg = stochmech::parse_config(text);
        if (cfg.display_name.empty() || cfg.display_name == to_string(cfg.kind))
            cfg.display_name = default_name;
        if (seed_given) cfg.seed = seed_override;

        stochmech::RunOptions opt;
        opt.threads = threads;
        opt.emit_plots = emit_plots || cfg.emit_plots;
        if (!out_dir.empty())
            opt.out_dir = out_dir;
        else if (!cfg.output_dir.empty())
            opt.out_dir = cfg.output_dir;
        else
            opt.out_dir = "out/" + cfg.display_name;

        const stochmech::RunSummary summary = stochmech::run_scenario(cfg, opt);
        print_summary(summary);
        std::printf("outputs in %s\n", opt.out_dir.c_str());
        return summary.all_pass() ? 0 : 1;
    } catch (const stochmech::Error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    }
}

// filterlab command-line driver.
//
// Exit codes: 0 success, 1 failed acceptance check, 2 invalid configuration,
// 3 budget exceeded, 4 any other error.

#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "filterlab/acceptance.hpp"
#include "filterlab/commands.hpp"
#include "filterlab/config.hpp"
#include "filterlab/manifest.hpp"

namespace {

struct GlobalFlags {
    std::string config;
    std::string out;
    std::vector<std::string> overrides;
    std::uint64_t seed = 0;
    bool seed_given = false;
    int threads = 1;
};

filterlab::RunContext load(const GlobalFlags& g)
{
    auto overrides = g.overrides;
    if (g.seed_given) overrides.push_back("seed=" + std::to_string(g.seed));
    filterlab::RunContext ctx{filterlab::load_config(g.config, overrides), g.threads};
    if (g.threads < 1) throw filterlab::ConfigError("--threads: must be at least 1");
    return ctx;
}

}  // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Particle filters, Picard discretization and error-expansion experiments"};
    app.require_subcommand(1);
    app.fallthrough();
    GlobalFlags g;
    app.add_option("--config", g.config, "JSON configuration file");
    app.add_option("--out", g.out, "output directory (default: the config's output field)");
    app.add_option("--set", g.overrides, "override a config field, e.g. --set grid.M=2048")->take_all();
    auto* seed_opt = app.add_option("--seed", g.seed, "master seed");
    app.add_option("--threads", g.threads, "worker threads (results do not depend on it)")->check(CLI::PositiveNumber);

    for (const auto& name : filterlab::run_commands()) app.add_subcommand(name, "run " + name);

    auto* report = app.add_subcommand("report", "slope fits from convergence CSV files");
    std::vector<std::string> report_files;
    report->add_option("files", report_files, "convergence or richardson CSV files")->required();

    auto* acceptance = app.add_subcommand("acceptance", "run the acceptance battery");
    std::string suite = "trivial";
    std::vector<int> criteria;
    acceptance->add_option("--suite", suite, "trivial or full")->check(CLI::IsMember({"trivial", "full"}));
    acceptance->add_option("--criterion", criteria, "restrict the full suite to these criteria")->check(CLI::Range(1, 10));

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 2;
    }
    g.seed_given = seed_opt->count() > 0;

    try {
        if (report->parsed()) {
            std::vector<std::string> texts;
            for (const auto& f : report_files) texts.push_back(filterlab::read_text_file(f));
            const auto rep = filterlab::slope_report(texts);
            filterlab::render_report(std::cout, rep);
            if (!g.out.empty()) {
                const auto ctx = load(g);
                filterlab::RunOutput out(g.out, "report", ctx.config);
                out.write_with("report.csv", [&](std::ostream& os) { filterlab::write_report_csv(os, rep); });
                out.finish();
            }
            return 0;
        }
        if (acceptance->parsed()) {
            filterlab::AcceptanceOptions opts;
            if (g.seed_given) opts.seed = g.seed;
            opts.threads = g.threads;
            const std::filesystem::path dir = g.out.empty() ? "acceptance_out" : g.out;
            opts.scratch = dir / "scratch";
            return filterlab::run_acceptance(suite, opts, criteria, std::cout, dir) ? 0 : 1;
        }
        const auto ctx = load(g);
        const std::string name = app.get_subcommands().front()->get_name();
        const std::string dir = g.out.empty() ? ctx.config.output : g.out;
        const auto manifest = filterlab::run_command(name, ctx, dir);
        std::cout << name << ": wrote " << manifest["files"].size() << " files to " << dir << "\n";
        return 0;
    } catch (const filterlab::ConfigError& e) {
        std::cerr << "configuration error: " << e.what() << "\n";
        return 2;
    } catch (const filterlab::BudgetError& e) {
        std::cerr << "budget exceeded: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 4;
    }
}
